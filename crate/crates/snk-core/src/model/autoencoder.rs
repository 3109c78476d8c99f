//! Dense feedforward autoencoder with hand-rolled backpropagation and
//! Pearlmutter-style Hessian-vector products.
//!
//! Layers are fully connected; hidden layers apply a smooth activation, the
//! output layer is linear. The per-sample loss is squared reconstruction
//! error `½‖a_L − y‖²`, averaged over the batch. Parameters live in one flat
//! vector, layer-major: for each layer the weight matrix in row-major order,
//! then the bias — the layout checkpoints and traces rely on.

use std::io::{BufRead, BufReader, Write as _};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::model::{check_param_len, Batch, Dataset, DifferentiableModel, Split};
use crate::numerics::{format_f64, parse_f64, SeededRng};
use crate::{CoreError, CoreResult};

/// Hidden-layer activation, as a `(φ, φ′, φ″)` triple. Both choices are
/// smooth with bounded second derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Logistic,
}

impl Activation {
    pub fn value(&self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Logistic => 1.0 / (1.0 + (-z).exp()),
        }
    }

    /// First and second derivative expressed through the activation value
    /// `a = φ(z)` (both choices admit this, saving a transcendental call).
    pub fn derivs_from_value(&self, a: f64) -> (f64, f64) {
        match self {
            Activation::Tanh => {
                let d1 = 1.0 - a * a;
                (d1, -2.0 * a * d1)
            }
            Activation::Logistic => {
                let d1 = a * (1.0 - a);
                (d1, d1 * (1.0 - 2.0 * a))
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Logistic => "logistic",
        }
    }
}

/// Flat parameter count for a stack of dense layers with biases.
pub fn param_count(widths: &[usize]) -> usize {
    widths
        .windows(2)
        .map(|w| w[0] * w[1] + w[1])
        .sum()
}

/// Offsets of one layer's weight block and bias block in the flat vector.
#[derive(Debug, Clone, Copy)]
struct LayerDims {
    input: usize,
    output: usize,
    w_off: usize,
    b_off: usize,
}

#[derive(Debug)]
pub struct FeedforwardAutoencoder {
    widths: Vec<usize>,
    layers: Vec<LayerDims>,
    dim: usize,
    activation: Activation,
    gamma: f64,
    train: Dataset,
    test: Dataset,
}

/// Per-sample forward state: `acts[0]` is the input, `acts[l]` the output of
/// layer `l`; the final entry is the linear network output.
struct ForwardState {
    acts: Vec<Vec<f64>>,
}

impl FeedforwardAutoencoder {
    pub fn new(
        widths: Vec<usize>,
        activation: Activation,
        gamma: f64,
        train: Dataset,
        test: Dataset,
    ) -> CoreResult<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(CoreError::InvalidArgument(format!(
                "autoencoder widths {widths:?}: need at least two nonzero layer widths"
            )));
        }
        if !gamma.is_finite() || gamma < 0.0 {
            return Err(CoreError::InvalidArgument(format!(
                "autoencoder gamma {gamma} must be finite and >= 0"
            )));
        }
        let (n0, nl) = (widths[0], *widths.last().expect("nonempty"));
        for (name, ds) in [("train", &train), ("test", &test)] {
            if ds.is_empty() {
                continue;
            }
            if ds.input_dim() != n0 || ds.target_dim() != nl {
                return Err(CoreError::InvalidArgument(format!(
                    "{name} dataset shape ({}, {}) does not match widths ({n0}, {nl})",
                    ds.input_dim(),
                    ds.target_dim()
                )));
            }
        }
        let mut layers = Vec::with_capacity(widths.len() - 1);
        let mut off = 0;
        for w in widths.windows(2) {
            let (input, output) = (w[0], w[1]);
            layers.push(LayerDims {
                input,
                output,
                w_off: off,
                b_off: off + input * output,
            });
            off += input * output + output;
        }
        Ok(Self {
            widths,
            layers,
            dim: off,
            activation,
            gamma,
            train,
            test,
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn dataset(&self, split: Split) -> &Dataset {
        match split {
            Split::Train => &self.train,
            Split::Test => &self.test,
        }
    }

    /// Gaussian initialization `w ~ N(0, scale²)` for every entry. The scale
    /// is explicit config; no implicit fan-in correction.
    pub fn init_params(&self, scale: f64, rng: &mut SeededRng) -> Vec<f64> {
        (0..self.dim).map(|_| scale * rng.normal()).collect()
    }

    /// `W_l u + b_l` when `bias` is set, else `W_l u`.
    fn affine(&self, w: &[f64], l: usize, u: &[f64], bias: bool) -> Vec<f64> {
        let ld = self.layers[l];
        let mut out = Vec::with_capacity(ld.output);
        for i in 0..ld.output {
            let row = &w[ld.w_off + i * ld.input..ld.w_off + (i + 1) * ld.input];
            let mut acc = if bias { w[ld.b_off + i] } else { 0.0 };
            for (wv, uv) in row.iter().zip(u) {
                acc += wv * uv;
            }
            out.push(acc);
        }
        out
    }

    /// `W_lᵀ δ` for the backward pass.
    fn affine_t(&self, w: &[f64], l: usize, delta: &[f64]) -> Vec<f64> {
        let ld = self.layers[l];
        let mut out = vec![0.0; ld.input];
        for i in 0..ld.output {
            let row = &w[ld.w_off + i * ld.input..ld.w_off + (i + 1) * ld.input];
            let d = delta[i];
            if d != 0.0 {
                for (o, wv) in out.iter_mut().zip(row) {
                    *o += d * wv;
                }
            }
        }
        out
    }

    fn forward(&self, w: &[f64], x: &[f64]) -> ForwardState {
        let last = self.layers.len() - 1;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for l in 0..self.layers.len() {
            let mut z = self.affine(w, l, acts.last().expect("nonempty"), true);
            if l < last {
                for v in z.iter_mut() {
                    *v = self.activation.value(*v);
                }
            }
            acts.push(z);
        }
        ForwardState { acts }
    }

    /// Accumulate `coeff · ∇(per-sample loss)` into `grad`, given the
    /// forward state. Returns the output-layer residual `a_L − y`.
    fn accumulate_gradient(
        &self,
        w: &[f64],
        state: &ForwardState,
        y: &[f64],
        coeff: f64,
        grad: &mut [f64],
    ) {
        let last = self.layers.len() - 1;
        let mut delta: Vec<f64> = state.acts[last + 1]
            .iter()
            .zip(y)
            .map(|(a, t)| a - t)
            .collect();
        for l in (0..self.layers.len()).rev() {
            let ld = self.layers[l];
            let a_prev = &state.acts[l];
            for i in 0..ld.output {
                let di = coeff * delta[i];
                let row = &mut grad[ld.w_off + i * ld.input..ld.w_off + (i + 1) * ld.input];
                for (g, a) in row.iter_mut().zip(a_prev) {
                    *g += di * a;
                }
                grad[ld.b_off + i] += di;
            }
            if l > 0 {
                let mut back = self.affine_t(w, l, &delta);
                for (b, a) in back.iter_mut().zip(&state.acts[l]) {
                    let (d1, _) = self.activation.derivs_from_value(*a);
                    *b *= d1;
                }
                delta = back;
            }
        }
    }

    /// Accumulate `coeff · ∇²(per-sample loss) v` into `out` via forward- and
    /// backward-mode directional differentiation of backpropagation.
    fn accumulate_hvp(
        &self,
        w: &[f64],
        v: &[f64],
        state: &ForwardState,
        y: &[f64],
        coeff: f64,
        out: &mut [f64],
    ) {
        let last = self.layers.len() - 1;
        // Forward sweep of directional derivatives at parameters w + εv.
        // r_zs[l] is the pre-activation perturbation of layer l, r_acts[l]
        // the post-activation one; the input carries no dependence.
        let mut r_zs: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut r_acts: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len() + 1);
        r_acts.push(vec![0.0; state.acts[0].len()]);
        for l in 0..self.layers.len() {
            let mut rz = self.affine(v, l, &state.acts[l], true);
            let wr = self.affine(w, l, &r_acts[l], false);
            for (r, extra) in rz.iter_mut().zip(&wr) {
                *r += extra;
            }
            let ra = if l < last {
                rz.iter()
                    .zip(&state.acts[l + 1])
                    .map(|(r, a)| r * self.activation.derivs_from_value(*a).0)
                    .collect()
            } else {
                rz.clone()
            };
            r_zs.push(rz);
            r_acts.push(ra);
        }

        let mut delta: Vec<f64> = state.acts[last + 1]
            .iter()
            .zip(y)
            .map(|(a, t)| a - t)
            .collect();
        // Linear output and squared error make the residual's directional
        // derivative equal the output perturbation itself.
        let mut r_delta: Vec<f64> = r_acts[last + 1].clone();
        for l in (0..self.layers.len()).rev() {
            let ld = self.layers[l];
            let a_prev = &state.acts[l];
            let ra_prev = &r_acts[l];
            for i in 0..ld.output {
                let (di, rdi) = (delta[i], r_delta[i]);
                let row = &mut out[ld.w_off + i * ld.input..ld.w_off + (i + 1) * ld.input];
                for ((o, a), ra) in row.iter_mut().zip(a_prev).zip(ra_prev) {
                    *o += coeff * (rdi * a + di * ra);
                }
                out[ld.b_off + i] += coeff * rdi;
            }
            if l > 0 {
                let back = self.affine_t(w, l, &delta);
                let mut r_back = self.affine_t(v, l, &delta);
                let wr = self.affine_t(w, l, &r_delta);
                for (r, extra) in r_back.iter_mut().zip(&wr) {
                    *r += extra;
                }
                let rz_prev = &r_zs[l - 1];
                let mut new_delta = Vec::with_capacity(back.len());
                let mut new_r_delta = Vec::with_capacity(back.len());
                for j in 0..back.len() {
                    let (d1, d2) = self.activation.derivs_from_value(state.acts[l][j]);
                    new_delta.push(back[j] * d1);
                    new_r_delta.push(r_back[j] * d1 + back[j] * d2 * rz_prev[j]);
                }
                delta = new_delta;
                r_delta = new_r_delta;
            }
        }
    }

    fn batch_samples<'a>(&'a self, split: Split, batch: &Batch) -> CoreResult<&'a Dataset> {
        let ds = self.dataset(split);
        batch.validate_in_range(ds.len())?;
        Ok(ds)
    }
}

impl DifferentiableModel for FeedforwardAutoencoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }

    fn num_samples(&self, split: Split) -> usize {
        self.dataset(split).len()
    }

    fn loss_raw(&self, w: &[f64], split: Split, batch: &Batch) -> CoreResult<f64> {
        check_param_len(self.dim, w, "autoencoder loss")?;
        let ds = self.batch_samples(split, batch)?;
        let mut total = 0.0;
        for &i in batch.indices() {
            let s = ds.sample(i);
            let state = self.forward(w, &s.x);
            let out = state.acts.last().expect("nonempty");
            total += 0.5
                * out
                    .iter()
                    .zip(&s.y)
                    .map(|(a, t)| (a - t) * (a - t))
                    .sum::<f64>();
        }
        Ok(total / batch.len() as f64)
    }

    fn gradient_raw(&self, w: &[f64], split: Split, batch: &Batch) -> CoreResult<Vec<f64>> {
        check_param_len(self.dim, w, "autoencoder gradient")?;
        let ds = self.batch_samples(split, batch)?;
        let coeff = 1.0 / batch.len() as f64;
        let mut grad = vec![0.0; self.dim];
        for &i in batch.indices() {
            let s = ds.sample(i);
            let state = self.forward(w, &s.x);
            self.accumulate_gradient(w, &state, &s.y, coeff, &mut grad);
        }
        Ok(grad)
    }

    fn hvp_raw(&self, w: &[f64], split: Split, batch: &Batch, v: &[f64]) -> CoreResult<Vec<f64>> {
        check_param_len(self.dim, w, "autoencoder hvp")?;
        check_param_len(self.dim, v, "autoencoder hvp direction")?;
        let ds = self.batch_samples(split, batch)?;
        let coeff = 1.0 / batch.len() as f64;
        let mut out = vec![0.0; self.dim];
        for &i in batch.indices() {
            let s = ds.sample(i);
            let state = self.forward(w, &s.x);
            self.accumulate_hvp(w, v, &state, &s.y, coeff, &mut out);
        }
        Ok(out)
    }
}

/// A saved flat parameter vector plus the metadata needed to rebuild the
/// network around it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub widths: Vec<usize>,
    pub activation: Activation,
    pub seed: u64,
    pub params: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    widths: Vec<usize>,
    activation: Activation,
    seed: u64,
}

fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Write the flat weight vector as a one-column CSV (header `w`) and a JSON
/// sidecar `<stem>.json` with widths, activation name, and seed.
pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> CoreResult<()> {
    if ckpt.params.len() != param_count(&ckpt.widths) {
        return Err(CoreError::DimensionMismatch {
            context: "checkpoint parameter vector",
            expected: param_count(&ckpt.widths),
            got: ckpt.params.len(),
        });
    }
    let mut out = String::from("w\n");
    for &v in &ckpt.params {
        out.push_str(&format_f64(v));
        out.push('\n');
    }
    std::fs::File::create(path)?.write_all(out.as_bytes())?;
    let sidecar = Sidecar {
        widths: ckpt.widths.clone(),
        activation: ckpt.activation,
        seed: ckpt.seed,
    };
    let json = serde_json::to_string_pretty(&sidecar)?;
    std::fs::write(sidecar_path(path), json)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> CoreResult<Checkpoint> {
    let sidecar: Sidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
    let f = std::fs::File::open(path)?;
    let mut lines = BufReader::new(f).lines();
    match lines.next() {
        Some(Ok(h)) if h.trim() == "w" => {}
        _ => {
            return Err(CoreError::Parse {
                what: "checkpoint CSV",
                line: 1,
                detail: "expected header `w`".into(),
            })
        }
    }
    let mut params = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        params.push(parse_f64(line.trim(), "checkpoint CSV", i + 2)?);
    }
    if params.len() != param_count(&sidecar.widths) {
        return Err(CoreError::DimensionMismatch {
            context: "checkpoint parameter vector",
            expected: param_count(&sidecar.widths),
            got: params.len(),
        });
    }
    Ok(Checkpoint {
        widths: sidecar.widths,
        activation: sidecar.activation,
        seed: sidecar.seed,
        params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{directional_fd_loss, fd_hvp};
    use crate::numerics::{dot, norm2, sub};

    fn fixture(widths: &[usize], activation: Activation, gamma: f64) -> FeedforwardAutoencoder {
        let mut rng = SeededRng::new(11);
        let n0 = widths[0];
        let train =
            Dataset::synthetic_mixture(10, n0, 2, &vec![1.0; n0], &mut rng).unwrap();
        let test = Dataset::synthetic_mixture(4, n0, 2, &vec![1.0; n0], &mut rng).unwrap();
        FeedforwardAutoencoder::new(widths.to_vec(), activation, gamma, train, test).unwrap()
    }

    #[test]
    fn parameter_count_follows_layer_widths() {
        assert_eq!(param_count(&[16, 4, 16]), 16 * 4 + 4 + 4 * 16 + 16);
        assert_eq!(param_count(&[16, 4, 16]), 148);
        assert_eq!(param_count(&[24, 12, 24]), 24 * 12 + 12 + 12 * 24 + 24);
        let net = fixture(&[8, 3, 8], Activation::Tanh, 0.0);
        assert_eq!(net.dim(), param_count(&[8, 3, 8]));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for activation in [Activation::Tanh, Activation::Logistic] {
            let net = fixture(&[8, 3, 8], activation, 0.2);
            let mut rng = SeededRng::new(3);
            let w = net.init_params(0.5, &mut rng);
            let batch = Batch::new(vec![0, 2, 5, 7]).unwrap();
            let g = net.gradient(&w, Split::Train, &batch).unwrap();
            for _ in 0..5 {
                let dir = rng.unit_vector(net.dim());
                let fd =
                    directional_fd_loss(&net, &w, Split::Train, &batch, &dir, 1e-5).unwrap();
                let an = dot(&g, &dir).unwrap();
                assert!(
                    (fd - an).abs() <= 1e-6 * (1.0 + an.abs()),
                    "{activation:?}: fd {fd} vs analytic {an}"
                );
            }
        }
    }

    #[test]
    fn hvp_matches_finite_differences() {
        for activation in [Activation::Tanh, Activation::Logistic] {
            let net = fixture(&[8, 3, 8], activation, 0.1);
            let mut rng = SeededRng::new(4);
            let w = net.init_params(0.5, &mut rng);
            let batch = Batch::new(vec![1, 3, 4]).unwrap();
            for _ in 0..3 {
                let v = rng.normal_vec(net.dim());
                let hv = net.hvp(&w, Split::Train, &batch, &v).unwrap();
                let fd = fd_hvp(&net, &w, Split::Train, &batch, &v, 1e-5).unwrap();
                let diff = norm2(&sub(&hv, &fd).unwrap());
                assert!(
                    diff <= 1e-5 * (1.0 + norm2(&hv)),
                    "{activation:?}: hvp fd mismatch {diff}"
                );
            }
        }
    }

    #[test]
    fn hvp_is_symmetric_as_a_bilinear_form() {
        let net = fixture(&[6, 4, 2, 4, 6], Activation::Tanh, 0.3);
        let mut rng = SeededRng::new(9);
        let w = net.init_params(0.7, &mut rng);
        let batch = Batch::new(vec![0, 1, 2]).unwrap();
        for _ in 0..10 {
            let u = rng.normal_vec(net.dim());
            let v = rng.normal_vec(net.dim());
            let hu = net.hvp(&w, Split::Train, &batch, &u).unwrap();
            let hv = net.hvp(&w, Split::Train, &batch, &v).unwrap();
            let a = dot(&v, &hu).unwrap();
            let b = dot(&u, &hv).unwrap();
            assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs().max(b.abs())));
        }
    }

    #[test]
    fn deeper_network_gradient_is_consistent() {
        let net = fixture(&[6, 4, 2, 4, 6], Activation::Tanh, 0.0);
        let mut rng = SeededRng::new(15);
        let w = net.init_params(0.8, &mut rng);
        let batch = Batch::full(10).unwrap();
        let g = net.gradient(&w, Split::Train, &batch).unwrap();
        let dir = rng.unit_vector(net.dim());
        let fd = directional_fd_loss(&net, &w, Split::Train, &batch, &dir, 1e-5).unwrap();
        let an = dot(&g, &dir).unwrap();
        assert!((fd - an).abs() <= 1e-6 * (1.0 + an.abs()));
    }

    #[test]
    fn checkpoint_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.csv");
        let mut rng = SeededRng::new(21);
        let ckpt = Checkpoint {
            widths: vec![8, 3, 8],
            activation: Activation::Logistic,
            seed: 21,
            params: (0..param_count(&[8, 3, 8])).map(|_| rng.normal()).collect(),
        };
        save_checkpoint(&path, &ckpt).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back, ckpt);
        assert!(dir.path().join("net.json").exists());
    }

    #[test]
    fn checkpoint_rejects_wrong_length() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        let ckpt = Checkpoint {
            widths: vec![8, 3, 8],
            activation: Activation::Tanh,
            seed: 0,
            params: vec![0.0; 7],
        };
        assert!(save_checkpoint(&path, &ckpt).is_err());
    }

    #[test]
    fn dataset_shape_is_validated() {
        let mut rng = SeededRng::new(2);
        let train = Dataset::synthetic_mixture(5, 7, 1, &[1.0; 7], &mut rng).unwrap();
        let test = Dataset::new(8, 8, vec![]).unwrap();
        let err = FeedforwardAutoencoder::new(vec![8, 3, 8], Activation::Tanh, 0.0, train, test);
        assert!(err.is_err());
    }
}
