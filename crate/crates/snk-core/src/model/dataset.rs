//! In-memory supervised datasets with a fixed CSV interchange format and a
//! synthetic Gaussian-mixture generator for autoencoder experiments.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::numerics::{format_f64, parse_f64, SeededRng};
use crate::{CoreError, CoreResult};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    input_dim: usize,
    target_dim: usize,
    samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(input_dim: usize, target_dim: usize, samples: Vec<Sample>) -> CoreResult<Self> {
        for (i, s) in samples.iter().enumerate() {
            if s.x.len() != input_dim || s.y.len() != target_dim {
                return Err(CoreError::InvalidArgument(format!(
                    "sample {i}: shape ({}, {}) does not match dataset shape ({input_dim}, {target_dim})",
                    s.x.len(),
                    s.y.len()
                )));
            }
            if !crate::numerics::all_finite(&s.x) || !crate::numerics::all_finite(&s.y) {
                return Err(CoreError::InvalidArgument(format!(
                    "sample {i} contains non-finite values"
                )));
            }
        }
        Ok(Self {
            input_dim,
            target_dim,
            samples,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample(&self, i: usize) -> &Sample {
        &self.samples[i]
    }

    /// Auto-association view: targets equal inputs.
    pub fn auto_associative(xs: Vec<Vec<f64>>) -> CoreResult<Self> {
        let dim = xs.first().map_or(0, Vec::len);
        let samples = xs
            .into_iter()
            .map(|x| Sample { y: x.clone(), x })
            .collect();
        Self::new(dim, dim, samples)
    }

    /// Synthetic Gaussian mixture for autoencoder fixtures: `components`
    /// means are drawn `N(0, I)`, each sample is `(mean_c + z) ∘ scales`
    /// for a uniform component choice and standard normal `z`, targets equal
    /// inputs. Anisotropic `scales` shape the data covariance (and with it
    /// the curvature spread of models trained on the data).
    pub fn synthetic_mixture(
        n: usize,
        dim: usize,
        components: usize,
        scales: &[f64],
        rng: &mut SeededRng,
    ) -> CoreResult<Self> {
        if scales.len() != dim {
            return Err(CoreError::DimensionMismatch {
                context: "synthetic_mixture scales",
                expected: dim,
                got: scales.len(),
            });
        }
        if components == 0 {
            return Err(CoreError::InvalidArgument(
                "synthetic_mixture: need at least one component".into(),
            ));
        }
        let means: Vec<Vec<f64>> = (0..components).map(|_| rng.normal_vec(dim)).collect();
        let mut xs = Vec::with_capacity(n);
        for _ in 0..n {
            let c = rng.below(components);
            let z = rng.normal_vec(dim);
            let x: Vec<f64> = (0..dim).map(|j| (means[c][j] + z[j]) * scales[j]).collect();
            xs.push(x);
        }
        Self::auto_associative(xs)
    }

    /// Geometrically decaying per-coordinate scales from 1 down to `floor`.
    pub fn geometric_scales(dim: usize, floor: f64) -> Vec<f64> {
        if dim <= 1 {
            return vec![1.0; dim];
        }
        let ratio = floor.powf(1.0 / (dim as f64 - 1.0));
        (0..dim).map(|j| ratio.powi(j as i32)).collect()
    }

    /// Write as CSV with header `x0,..,x{n-1},y0,..,y{m-1}`, one sample per
    /// row, floats at 17 significant digits.
    pub fn to_csv(&self, path: &Path) -> CoreResult<()> {
        let mut out = String::new();
        let header: Vec<String> = (0..self.input_dim)
            .map(|j| format!("x{j}"))
            .chain((0..self.target_dim).map(|j| format!("y{j}")))
            .collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for s in &self.samples {
            let row: Vec<String> = s
                .x
                .iter()
                .chain(s.y.iter())
                .map(|&v| format_f64(v))
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(out.as_bytes())?;
        Ok(())
    }

    pub fn from_csv(path: &Path) -> CoreResult<Self> {
        let f = std::fs::File::open(path)?;
        let mut lines = BufReader::new(f).lines();
        let header = lines
            .next()
            .ok_or_else(|| CoreError::Parse {
                what: "dataset CSV",
                line: 1,
                detail: "empty file".into(),
            })??;
        let cols: Vec<&str> = header.trim_end().split(',').collect();
        let input_dim = cols.iter().take_while(|c| c.starts_with('x')).count();
        let target_dim = cols.len() - input_dim;
        for (j, c) in cols.iter().enumerate() {
            let expect = if j < input_dim {
                format!("x{j}")
            } else {
                format!("y{}", j - input_dim)
            };
            if **c != expect {
                return Err(CoreError::Parse {
                    what: "dataset CSV",
                    line: 1,
                    detail: format!("expected column {expect:?}, found {c:?}"),
                });
            }
        }
        if input_dim == 0 || target_dim == 0 {
            return Err(CoreError::Parse {
                what: "dataset CSV",
                line: 1,
                detail: "header must contain x- and y-columns".into(),
            });
        }
        let mut samples = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim_end().split(',').collect();
            if fields.len() != cols.len() {
                return Err(CoreError::Parse {
                    what: "dataset CSV",
                    line: lineno + 2,
                    detail: format!("expected {} columns, found {}", cols.len(), fields.len()),
                });
            }
            let vals: Vec<f64> = fields
                .iter()
                .map(|s| parse_f64(s, "dataset CSV", lineno + 2))
                .collect::<CoreResult<_>>()?;
            samples.push(Sample {
                x: vals[..input_dim].to_vec(),
                y: vals[input_dim..].to_vec(),
            });
        }
        Self::new(input_dim, target_dim, samples)
    }
}
