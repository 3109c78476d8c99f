//! Spectrum probes along an iterate path: randomized eigendecompositions of
//! the raw full-batch Hessian on the train and test splits at a stride of
//! iterates, dumped as CSV.

use snk_core::lowrank::randomized_eig;
use snk_core::model::{Batch, BatchHessianOperator, DifferentiableModel, Split};
use snk_core::numerics::{format_f64, parse_f64, SeededRng};
use snk_core::optimizer::RunTrace;
use snk_core::{CoreError, CoreResult};

pub const SPECTRUM_HEADER: &str = "iteration,rank_index,eigenvalue,split";

/// Oversampling columns behind every probe sketch (the retained rank is the
/// caller's `ranks`).
pub const PROBE_OVERSAMPLE: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRow {
    pub iteration: usize,
    pub rank_index: usize,
    pub eigenvalue: f64,
    pub split: Split,
}

fn split_name(split: Split) -> &'static str {
    match split {
        Split::Train => "train",
        Split::Test => "test",
    }
}

/// Probe the dominant Hessian spectrum at every `every`-th stored iterate of
/// the trace, on both splits, returning CSV text with one row per retained
/// eigenvalue. The probe RNG is derived from the iteration index and split
/// alone, so a fixed (model, trace) pair always dumps identical bytes.
pub fn spectrum_probe<M: DifferentiableModel + ?Sized>(
    model: &M,
    trace: &RunTrace,
    ranks: usize,
    every: usize,
) -> CoreResult<String> {
    let iterates = trace.iterates.as_ref().ok_or_else(|| {
        CoreError::InvalidArgument(
            "spectrum probe needs stored iterates; rerun with `keep_iterates: true`".into(),
        )
    })?;
    if every == 0 {
        return Err(CoreError::InvalidArgument(
            "spectrum probe stride `every` must be >= 1".into(),
        ));
    }
    if ranks == 0 {
        return Err(CoreError::InvalidArgument(
            "spectrum probe needs ranks >= 1".into(),
        ));
    }
    let d = model.dim();
    let r = ranks.min(d);

    let mut out = String::from(SPECTRUM_HEADER);
    out.push('\n');
    for k in (0..iterates.len()).step_by(every) {
        let w = trace.iterate(k)?;
        for split in [Split::Train, Split::Test] {
            let n = model.num_samples(split);
            if n == 0 {
                continue;
            }
            let batch = Batch::full(n)?;
            let op = BatchHessianOperator::raw(model, w, split, &batch);
            // Deterministic probe seed: iteration and split only.
            let mut rng = SeededRng::new(probe_seed(k, split));
            let factor = randomized_eig(&op, r, PROBE_OVERSAMPLE, &mut rng)?;
            for (j, lam) in factor.lambdas().iter().enumerate() {
                out.push_str(&format!(
                    "{k},{j},{},{}\n",
                    format_f64(*lam),
                    split_name(split)
                ));
            }
        }
    }
    Ok(out)
}

/// Seed for the probe sketch at one (iteration, split) cell.
fn probe_seed(iteration: usize, split: Split) -> u64 {
    let split_tag = match split {
        Split::Train => 1u64,
        Split::Test => 2u64,
    };
    0x9e37_79b9_7f4a_7c15u64
        .wrapping_mul(iteration as u64 + 1)
        .wrapping_add(split_tag)
}

pub fn parse_spectrum_csv(text: &str) -> CoreResult<Vec<SpectrumRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == SPECTRUM_HEADER => {}
        other => {
            return Err(CoreError::Parse {
                what: "spectrum header".into(),
                line: 1,
                detail: format!("got `{}`", other.map(|(_, l)| l).unwrap_or_default()),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(CoreError::Parse {
                what: "spectrum row".into(),
                line: line_no,
                detail: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let iteration = fields[0].parse().map_err(|_| CoreError::Parse {
            what: "spectrum iteration".into(),
            line: line_no,
            detail: format!("got `{}`", fields[0]),
        })?;
        let rank_index = fields[1].parse().map_err(|_| CoreError::Parse {
            what: "spectrum rank_index".into(),
            line: line_no,
            detail: format!("got `{}`", fields[1]),
        })?;
        let eigenvalue = parse_f64(fields[2], "spectrum eigenvalue", line_no)?;
        let split = match fields[3] {
            "train" => Split::Train,
            "test" => Split::Test,
            other => {
                return Err(CoreError::Parse {
                    what: "spectrum split".into(),
                    line: line_no,
                    detail: format!("got `{other}`"),
                })
            }
        };
        rows.push(SpectrumRow {
            iteration,
            rank_index,
            eigenvalue,
            split,
        });
    }
    Ok(rows)
}

/// Re-emit parsed rows; `parse → emit` is byte-identical to the original.
pub fn spectrum_to_csv(rows: &[SpectrumRow]) -> String {
    let mut out = String::from(SPECTRUM_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.iteration,
            row.rank_index,
            format_f64(row.eigenvalue),
            split_name(row.split)
        ));
    }
    out
}

/// CLI-facing description of a spectrum-probe experiment: run the optimizer
/// with stored iterates, then probe.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSpec {
    pub problem: crate::experiment::ProblemSpec,
    pub config: snk_core::optimizer::OptimizerConfig,
    #[serde(default = "default_ranks")]
    pub ranks: usize,
    #[serde(default = "default_every")]
    pub every: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<std::path::PathBuf>,
}

fn default_ranks() -> usize {
    30
}
fn default_every() -> usize {
    1
}

impl SpectrumSpec {
    pub fn load(path: &std::path::Path) -> CoreResult<Self> {
        let text = std::fs::read_to_string(path)?;
        let spec: Self = serde_json::from_str(&text).map_err(CoreError::Json)?;
        spec.config.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::ProblemSpec;
    use snk_core::optimizer::{run, OptimizerConfig};

    fn quadratic_run(keep: bool) -> (Box<dyn DifferentiableModel>, RunTrace) {
        let problem = ProblemSpec::Quadratic {
            dim: 6,
            spectrum: None,
            lambda_max: 1.5,
            decay: 0.6,
            random_basis: true,
            sigma_h: 0.05,
            n_train: 40,
            n_test: Some(12),
            gamma: 0.1,
            w_star: None,
            problem_seed: 3,
        };
        let model = problem.build().unwrap();
        let cfg: OptimizerConfig = serde_json::from_value(serde_json::json!({
            "method": "incg",
            "gamma": 0.1,
            "n_x": 40,
            "n_s": 10,
            "max_sweeps": 2000.0,
            "seed": 11,
            "keep_iterates": keep,
        }))
        .unwrap();
        let trace = run(model.as_ref(), &cfg).unwrap();
        (model, trace)
    }

    #[test]
    fn quadratic_spectra_are_stable_across_iterations_and_splits() {
        let (model, trace) = quadratic_run(true);
        let csv = spectrum_probe(model.as_ref(), &trace, 5, 2).unwrap();
        let rows = parse_spectrum_csv(&csv).unwrap();
        assert!(spectrum_to_csv(&rows) == csv, "round-trip not byte-identical");

        // The Hessian of a quadratic never moves: per (rank, split) cell the
        // probed eigenvalue varies only with estimator noise, and the top
        // train/test eigenvalues agree within sampling tolerance (both
        // splits share the mean Hessian, sigma_h is small).
        let top_train: Vec<f64> = rows
            .iter()
            .filter(|r| r.rank_index == 0 && r.split == Split::Train)
            .map(|r| r.eigenvalue)
            .collect();
        assert!(top_train.len() > 1);
        let spread = top_train
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
            - top_train.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread < 0.2, "top train eigenvalue drifted by {spread}");
        let top_test = rows
            .iter()
            .find(|r| r.rank_index == 0 && r.split == Split::Test)
            .unwrap()
            .eigenvalue;
        assert!(
            (top_train[0] - top_test).abs() < 0.3,
            "train {} vs test {top_test}",
            top_train[0]
        );

        // Monotone |eigenvalue| within each (iteration, split) row-group.
        for pair in rows.windows(2) {
            if pair[0].iteration == pair[1].iteration && pair[0].split == pair[1].split {
                assert!(pair[0].eigenvalue.abs() >= pair[1].eigenvalue.abs());
            }
        }
    }

    #[test]
    fn probe_requires_stored_iterates_and_valid_stride() {
        let (model, trace) = quadratic_run(false);
        assert!(spectrum_probe(model.as_ref(), &trace, 5, 1).is_err());
        let (model, trace) = quadratic_run(true);
        assert!(spectrum_probe(model.as_ref(), &trace, 5, 0).is_err());
        assert!(spectrum_probe(model.as_ref(), &trace, 0, 1).is_err());
    }

    #[test]
    fn identical_inputs_dump_identical_bytes() {
        let (model, trace) = quadratic_run(true);
        let a = spectrum_probe(model.as_ref(), &trace, 4, 3).unwrap();
        let b = spectrum_probe(model.as_ref(), &trace, 4, 3).unwrap();
        assert_eq!(a, b);
    }
}

