//! Differentiable test problems behind one trait, with sweep-exact cost
//! accounting.
//!
//! Cost model: a *sweep* is one forward plus one backward pass over a single
//! sample. Metered costs per call on a batch of N samples:
//!
//! * `loss` — N forward (half a sweep per sample; used by line searches),
//! * `gradient` — N forward + N backward (one sweep per sample),
//! * `hvp` — 2N forward + 2N backward (two sweeps per sample: the
//!   tangent-mode forward and backward passes of a Hessian-vector product
//!   come on top of the primal ones).
//!
//! Models implement the `*_raw` methods (unregularized empirical risk, mean
//! over the batch, accumulated in the batch's ascending index order); the
//! provided methods add the Tikhonov term `γ/2 ‖w‖²` and its derivatives as
//! one final elementwise addition, so a γ-model and a γ=0 model differ by
//! exactly that term. Metering happens in the [`Metered`] wrapper so that
//! the raw-vs-regularized split never double-counts.

mod autoencoder;
mod dataset;
mod quadratic;
mod saddle;

pub use autoencoder::{
    load_checkpoint, save_checkpoint, Activation, Checkpoint, FeedforwardAutoencoder,
};
pub use dataset::{Dataset, Sample};
pub use quadratic::{QuadraticParams, QuadraticProblem};
pub use saddle::{make_saddle_problem, MonkeySaddle, SaddleKind};

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::numerics::{self, LinearOperator};
use crate::{CoreError, CoreResult};

/// Which side of the train/test split a batch indexes into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// An ordered list of sample indices into one split. Without-replacement
/// draws come back sorted ascending, which fixes the floating-point reduction
/// order of every batched evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch(Vec<usize>);

impl Batch {
    pub fn new(indices: Vec<usize>) -> CoreResult<Self> {
        if indices.is_empty() {
            return Err(CoreError::EmptyBatch("Batch::new"));
        }
        Ok(Self(indices))
    }

    /// All indices `0..n` in order.
    pub fn full(n: usize) -> CoreResult<Self> {
        Self::new((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn validate_in_range(&self, len: usize) -> CoreResult<()> {
        for &i in &self.0 {
            if i >= len {
                return Err(CoreError::BatchIndexOutOfRange { index: i, len });
            }
        }
        Ok(())
    }

    pub fn all_distinct(&self) -> bool {
        let mut seen = self.0.clone();
        seen.sort_unstable();
        seen.windows(2).all(|w| w[0] != w[1])
    }

    /// Without-replacement subsample of `size` of this batch's indices
    /// (partial Fisher–Yates over positions, result sorted ascending).
    pub fn subsample(&self, size: usize, rng: &mut numerics::SeededRng) -> CoreResult<Batch> {
        let inner = sample_batch(rng, self.len(), size, false)?;
        let mut picked: Vec<usize> = inner.indices().iter().map(|&p| self.0[p]).collect();
        picked.sort_unstable();
        Batch::new(picked)
    }
}

/// Draw a batch of `size` indices from `0..population`.
///
/// Without replacement: partial Fisher–Yates (positions `i` in `0..size`
/// swapped with a uniform position in `i..population`), then sorted
/// ascending. `size == population` yields the full index set. With
/// replacement: `size` independent uniform draws, in draw order.
pub fn sample_batch(
    rng: &mut numerics::SeededRng,
    population: usize,
    size: usize,
    replacement: bool,
) -> CoreResult<Batch> {
    if size == 0 {
        return Err(CoreError::EmptyBatch("sample_batch"));
    }
    if population == 0 {
        return Err(CoreError::InvalidArgument(
            "sample_batch: empty population".into(),
        ));
    }
    if replacement {
        return Batch::new((0..size).map(|_| rng.below(population)).collect());
    }
    if size > population {
        return Err(CoreError::InvalidArgument(format!(
            "sample_batch: size {size} exceeds population {population} without replacement"
        )));
    }
    let mut pool: Vec<usize> = (0..population).collect();
    for i in 0..size {
        let j = i + rng.below(population - i);
        pool.swap(i, j);
    }
    let mut picked = pool[..size].to_vec();
    picked.sort_unstable();
    Batch::new(picked)
}

/// Atomic per-sample pass counters. Sweeps are `(forward + backward) / 2`,
/// so loss-only evaluations register as half-sweeps exactly.
#[derive(Debug, Default)]
pub struct SweepLedger {
    forward: AtomicU64,
    backward: AtomicU64,
}

impl SweepLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_forward(&self, n: u64) {
        self.forward.fetch_add(n, Ordering::Relaxed);
    }

    pub fn record_backward(&self, n: u64) {
        self.backward.fetch_add(n, Ordering::Relaxed);
    }

    pub fn forward_count(&self) -> u64 {
        self.forward.load(Ordering::Relaxed)
    }

    pub fn backward_count(&self) -> u64 {
        self.backward.load(Ordering::Relaxed)
    }

    /// Total sweeps; exact in f64 (counts are integers, halves are exact).
    pub fn sweeps(&self) -> f64 {
        (self.forward_count() + self.backward_count()) as f64 / 2.0
    }

    pub fn reset(&self) {
        self.forward.store(0, Ordering::Relaxed);
        self.backward.store(0, Ordering::Relaxed);
    }
}

/// A twice-differentiable empirical risk `F(w) = mean_i f_i(w)` over a
/// train/test split, with Tikhonov regularization `γ/2 ‖w‖²` applied by the
/// provided methods.
pub trait DifferentiableModel: Send + Sync {
    fn dim(&self) -> usize;
    fn gamma(&self) -> f64;
    fn num_samples(&self, split: Split) -> usize;

    /// Unregularized mean loss over the batch.
    fn loss_raw(&self, w: &[f64], split: Split, batch: &Batch) -> CoreResult<f64>;

    /// Unregularized mean gradient over the batch.
    fn gradient_raw(&self, w: &[f64], split: Split, batch: &Batch) -> CoreResult<Vec<f64>>;

    /// Unregularized mean Hessian-vector product over the batch.
    fn hvp_raw(&self, w: &[f64], split: Split, batch: &Batch, v: &[f64]) -> CoreResult<Vec<f64>>;

    /// `F̄(w) = F(w) + γ/2 ‖w‖²` on the batch.
    fn loss(&self, w: &[f64], split: Split, batch: &Batch) -> CoreResult<f64> {
        let raw = self.loss_raw(w, split, batch)?;
        Ok(raw + 0.5 * self.gamma() * numerics::dot_unchecked(w, w))
    }

    /// `∇F̄(w) = ∇F(w) + γ w` on the batch.
    fn gradient(&self, w: &[f64], split: Split, batch: &Batch) -> CoreResult<Vec<f64>> {
        let mut g = self.gradient_raw(w, split, batch)?;
        numerics::axpy(self.gamma(), w, &mut g);
        Ok(g)
    }

    /// `∇²F̄(w) v = ∇²F(w) v + γ v` on the batch.
    fn hvp(&self, w: &[f64], split: Split, batch: &Batch, v: &[f64]) -> CoreResult<Vec<f64>> {
        let mut hv = self.hvp_raw(w, split, batch, v)?;
        numerics::axpy(self.gamma(), v, &mut hv);
        Ok(hv)
    }
}

impl<T: DifferentiableModel + ?Sized> DifferentiableModel for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn gamma(&self) -> f64 {
        (**self).gamma()
    }
    fn num_samples(&self, split: Split) -> usize {
        (**self).num_samples(split)
    }
    fn loss_raw(&self, w: &[f64], split: Split, batch: &Batch) -> CoreResult<f64> {
        (**self).loss_raw(w, split, batch)
    }
    fn gradient_raw(&self, w: &[f64], split: Split, batch: &Batch) -> CoreResult<Vec<f64>> {
        (**self).gradient_raw(w, split, batch)
    }
    fn hvp_raw(&self, w: &[f64], split: Split, batch: &Batch, v: &[f64]) -> CoreResult<Vec<f64>> {
        (**self).hvp_raw(w, split, batch, v)
    }
}

impl<T: DifferentiableModel + ?Sized> DifferentiableModel for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn gamma(&self) -> f64 {
        (**self).gamma()
    }
    fn num_samples(&self, split: Split) -> usize {
        (**self).num_samples(split)
    }
    fn loss_raw(&self, w: &[f64], split: Split, batch: &Batch) -> CoreResult<f64> {
        (**self).loss_raw(w, split, batch)
    }
    fn gradient_raw(&self, w: &[f64], split: Split, batch: &Batch) -> CoreResult<Vec<f64>> {
        (**self).gradient_raw(w, split, batch)
    }
    fn hvp_raw(&self, w: &[f64], split: Split, batch: &Batch, v: &[f64]) -> CoreResult<Vec<f64>> {
        (**self).hvp_raw(w, split, batch, v)
    }
}

/// Metering decorator: forwards every `*_raw` call to the inner model and
/// atomically charges the ledger with the per-sample pass counts listed in
/// the module docs. The provided `loss`/`gradient`/`hvp` methods route
/// through the raw methods, so regularized calls are metered exactly once.
pub struct Metered<M> {
    inner: M,
    ledger: Arc<SweepLedger>,
}

impl<M: DifferentiableModel> Metered<M> {
    pub fn new(inner: M) -> Self {
        Self {
            inner,
            ledger: Arc::new(SweepLedger::new()),
        }
    }

    pub fn with_ledger(inner: M, ledger: Arc<SweepLedger>) -> Self {
        Self { inner, ledger }
    }

    pub fn ledger(&self) -> Arc<SweepLedger> {
        Arc::clone(&self.ledger)
    }

    pub fn inner(&self) -> &M {
        &self.inner
    }
}

impl<M: DifferentiableModel> DifferentiableModel for Metered<M> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn gamma(&self) -> f64 {
        self.inner.gamma()
    }
    fn num_samples(&self, split: Split) -> usize {
        self.inner.num_samples(split)
    }
    fn loss_raw(&self, w: &[f64], split: Split, batch: &Batch) -> CoreResult<f64> {
        self.ledger.record_forward(batch.len() as u64);
        self.inner.loss_raw(w, split, batch)
    }
    fn gradient_raw(&self, w: &[f64], split: Split, batch: &Batch) -> CoreResult<Vec<f64>> {
        let n = batch.len() as u64;
        self.ledger.record_forward(n);
        self.ledger.record_backward(n);
        self.inner.gradient_raw(w, split, batch)
    }
    fn hvp_raw(&self, w: &[f64], split: Split, batch: &Batch, v: &[f64]) -> CoreResult<Vec<f64>> {
        let n = 2 * batch.len() as u64;
        self.ledger.record_forward(n);
        self.ledger.record_backward(n);
        self.inner.hvp_raw(w, split, batch, v)
    }
}

/// The batch Hessian of a model at a fixed point, as a matrix-free symmetric
/// operator: `v ↦ ∇²F_batch(w) v` (raw) or `v ↦ ∇²F̄_batch(w) v`
/// (regularized, i.e. plus `γ v`).
pub struct BatchHessianOperator<'a, M: ?Sized> {
    model: &'a M,
    w: &'a [f64],
    split: Split,
    batch: &'a Batch,
    regularized: bool,
}

impl<'a, M: DifferentiableModel + ?Sized> BatchHessianOperator<'a, M> {
    pub fn raw(model: &'a M, w: &'a [f64], split: Split, batch: &'a Batch) -> Self {
        Self {
            model,
            w,
            split,
            batch,
            regularized: false,
        }
    }

    pub fn regularized(model: &'a M, w: &'a [f64], split: Split, batch: &'a Batch) -> Self {
        Self {
            model,
            w,
            split,
            batch,
            regularized: true,
        }
    }
}

impl<M: DifferentiableModel + ?Sized> LinearOperator for BatchHessianOperator<'_, M> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn apply(&self, v: &[f64]) -> CoreResult<Vec<f64>> {
        if self.regularized {
            self.model.hvp(self.w, self.split, self.batch, v)
        } else {
            self.model.hvp_raw(self.w, self.split, self.batch, v)
        }
    }
}

/// Central finite-difference directional derivative of the regularized loss:
/// `(F̄(w + h u) - F̄(w - h u)) / 2h`. Test oracle for gradients.
pub fn directional_fd_loss<M: DifferentiableModel + ?Sized>(
    model: &M,
    w: &[f64],
    split: Split,
    batch: &Batch,
    dir: &[f64],
    h: f64,
) -> CoreResult<f64> {
    let mut wp = w.to_vec();
    numerics::axpy(h, dir, &mut wp);
    let mut wm = w.to_vec();
    numerics::axpy(-h, dir, &mut wm);
    Ok((model.loss(&wp, split, batch)? - model.loss(&wm, split, batch)?) / (2.0 * h))
}

/// Central finite difference of the regularized gradient along `v`:
/// `(∇F̄(w + h v) - ∇F̄(w - h v)) / 2h ≈ ∇²F̄(w) v`. Test oracle for hvp.
pub fn fd_hvp<M: DifferentiableModel + ?Sized>(
    model: &M,
    w: &[f64],
    split: Split,
    batch: &Batch,
    v: &[f64],
    h: f64,
) -> CoreResult<Vec<f64>> {
    let mut wp = w.to_vec();
    numerics::axpy(h, v, &mut wp);
    let mut wm = w.to_vec();
    numerics::axpy(-h, v, &mut wm);
    let gp = model.gradient(&wp, split, batch)?;
    let gm = model.gradient(&wm, split, batch)?;
    Ok(gp
        .iter()
        .zip(&gm)
        .map(|(p, m)| (p - m) / (2.0 * h))
        .collect())
}

pub(crate) fn check_param_len(dim: usize, w: &[f64], context: &'static str) -> CoreResult<()> {
    if w.len() != dim {
        return Err(CoreError::DimensionMismatch {
            context,
            expected: dim,
            got: w.len(),
        });
    }
    Ok(())
}
