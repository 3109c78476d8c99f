//! Empirical estimation of the smoothness and noise constants that the
//! convergence bounds consume: the gradient Lipschitz constant (largest
//! Hessian eigenvalue magnitude), the most negative curvature, the
//! per-sample gradient noise, the per-sample Hessian noise, and the Hessian
//! Lipschitz constant. All estimates probe the raw (unregularized)
//! objective at caller-supplied parameter points.

use crate::lowrank::randomized_eig;
use crate::model::{sample_batch, Batch, BatchHessianOperator, DifferentiableModel, Split};
use crate::numerics::{self, norm2, sym_eig, DenseMatrix, SeededRng};
use crate::{CoreError, CoreResult};

#[derive(Debug, Clone)]
pub struct ConstantsOptions {
    /// Retained rank for the randomized eigenvalue probes (clamped to d).
    pub rank: usize,
    /// Oversampling columns for the randomized probes (≥ 2).
    pub oversample: usize,
    /// Subsample size for the Hessian-norm probes; 0 means full batch.
    pub subsample: usize,
    /// Independent subsample draws per probe point.
    pub hessian_draws: usize,
    /// Component Hessians to densify per probe for the Hessian-noise
    /// estimate; 0 means all training samples.
    pub sigma_samples: usize,
    /// Power-iteration steps for the Hessian-difference norm.
    pub power_iters: usize,
}

impl Default for ConstantsOptions {
    fn default() -> Self {
        Self {
            rank: 10,
            oversample: 5,
            subsample: 0,
            hessian_draws: 2,
            sigma_samples: 0,
            power_iters: 30,
        }
    }
}

/// Estimated assumption constants, with the sample counts behind them.
#[derive(Debug, Clone)]
pub struct AssumptionConstants {
    /// Largest Hessian eigenvalue magnitude observed (gradient Lipschitz
    /// bound L̂).
    pub grad_lipschitz: f64,
    /// Most negative Hessian eigenvalue magnitude observed (curvature floor
    /// ε̂_H; 0 when every probe looked positive semidefinite).
    pub curvature_floor: f64,
    /// Square root of the largest per-sample gradient covariance trace
    /// observed (v̂).
    pub grad_noise: f64,
    /// Square root of the largest spectral norm of the mean squared
    /// per-sample Hessian deviation (σ̂).
    pub hessian_noise: f64,
    /// Largest Hessian-difference norm per unit parameter distance between
    /// consecutive probes (M̂).
    pub hessian_lipschitz: f64,
    pub probe_count: usize,
    /// Total per-sample gradients evaluated for the noise estimate.
    pub gradient_samples: usize,
    /// Total component Hessians densified for the Hessian-noise estimate.
    pub hessian_samples: usize,
}

/// Dense per-batch Hessian assembled column-by-column through hvp calls.
fn dense_hessian<M: DifferentiableModel + ?Sized>(
    model: &M,
    w: &[f64],
    batch: &Batch,
) -> CoreResult<DenseMatrix> {
    let d = model.dim();
    let mut cols = Vec::with_capacity(d);
    let mut e = vec![0.0; d];
    for j in 0..d {
        e[j] = 1.0;
        cols.push(model.hvp_raw(w, Split::Train, batch, &e)?);
        e[j] = 0.0;
    }
    DenseMatrix::from_columns(&cols)
}

/// Estimate the assumption constants by probing the model at the given
/// parameter points. At least two probe points are required (the Hessian
/// Lipschitz estimate differences consecutive pairs); all probes must be
/// finite and of the model's dimension.
pub fn estimate_assumption_constants<M: DifferentiableModel + ?Sized>(
    model: &M,
    probes: &[Vec<f64>],
    opts: &ConstantsOptions,
    rng: &mut SeededRng,
) -> CoreResult<AssumptionConstants> {
    if probes.len() < 2 {
        return Err(CoreError::InvalidArgument(format!(
            "constant estimation needs at least 2 probe points, got {}",
            probes.len()
        )));
    }
    let d = model.dim();
    for (i, w) in probes.iter().enumerate() {
        if w.len() != d {
            return Err(CoreError::DimensionMismatch {
                context: "constant-estimation probe point",
                expected: d,
                got: w.len(),
            });
        }
        if !numerics::all_finite(w) {
            return Err(CoreError::InvalidArgument(format!(
                "probe point {i} contains non-finite values"
            )));
        }
    }
    let n = model.num_samples(Split::Train);
    if n == 0 {
        return Err(CoreError::EmptyBatch("constant estimation training set"));
    }
    if opts.oversample < 2 || opts.rank == 0 {
        return Err(CoreError::InvalidArgument(
            "constant estimation needs rank >= 1 and oversample >= 2".into(),
        ));
    }
    let rank = opts.rank.min(d);
    let subsample = if opts.subsample == 0 || opts.subsample > n {
        n
    } else {
        opts.subsample
    };
    let sigma_count = if opts.sigma_samples == 0 || opts.sigma_samples > n {
        n
    } else {
        opts.sigma_samples
    };

    let mut grad_lipschitz = 0.0f64;
    let mut curvature_floor = 0.0f64;
    let mut grad_var = 0.0f64;
    let mut hessian_var = 0.0f64;

    for w in probes {
        // Largest-magnitude and most negative eigenvalues of subsampled
        // Hessians, through the randomized low-rank probe.
        for _ in 0..opts.hessian_draws.max(1) {
            let batch = if subsample == n {
                Batch::full(n)?
            } else {
                sample_batch(rng, n, subsample, false)?
            };
            let op = BatchHessianOperator::raw(model, w, Split::Train, &batch);
            let factor = randomized_eig(&op, rank, opts.oversample, rng)?;
            if let Some(first) = factor.lambdas().first() {
                grad_lipschitz = grad_lipschitz.max(first.abs());
            }
            if let Some(min_eig) = factor.min_retained_eigenvalue() {
                curvature_floor = curvature_floor.max((-min_eig).max(0.0));
            }
        }

        // Per-sample gradient covariance trace: (1/N) Σ ‖gᵢ − ḡ‖².
        let mut grads = Vec::with_capacity(n);
        let mut mean = vec![0.0; d];
        for i in 0..n {
            let g = model.gradient_raw(w, Split::Train, &Batch::new(vec![i])?)?;
            numerics::axpy(1.0, &g, &mut mean);
            grads.push(g);
        }
        numerics::scale(1.0 / n as f64, &mut mean);
        let trace = grads
            .iter()
            .map(|g| {
                let diff = numerics::sub(g, &mean).unwrap();
                let nn = norm2(&diff);
                nn * nn
            })
            .sum::<f64>()
            / n as f64;
        grad_var = grad_var.max(trace);

        // Hessian-noise: spectral norm of the mean squared deviation of
        // sampled component Hessians from the full-batch Hessian.
        let full = dense_hessian(model, w, &Batch::full(n)?)?;
        let sample_ids: Vec<usize> = if sigma_count == n {
            (0..n).collect()
        } else {
            sample_batch(rng, n, sigma_count, false)?.indices().to_vec()
        };
        let mut mean_sq = DenseMatrix::zeros(d, d);
        for &i in &sample_ids {
            let mut bi = dense_hessian(model, w, &Batch::new(vec![i])?)?;
            bi.add_scaled(-1.0, &full)?;
            let sq = bi.matmul(&bi)?;
            mean_sq.add_scaled(1.0, &sq)?;
        }
        mean_sq.scale(1.0 / sample_ids.len() as f64);
        mean_sq.symmetrize();
        let (lam, _) = sym_eig(&mean_sq)?;
        if let Some(first) = lam.first() {
            hessian_var = hessian_var.max(first.abs());
        }
    }

    // Hessian Lipschitz constant: power iteration on the difference of the
    // full-batch Hessian operators at consecutive probe pairs. (A randomized
    // sketch would degenerate on an exactly constant Hessian; power
    // iteration just reports zero.)
    let mut hessian_lipschitz = 0.0f64;
    let full_batch = Batch::full(n)?;
    for pair in probes.windows(2) {
        let (wa, wb) = (&pair[0], &pair[1]);
        let dist = norm2(&numerics::sub(wa, wb)?);
        if dist == 0.0 {
            continue;
        }
        let mut v = rng.unit_vector(d);
        let mut est = 0.0f64;
        for _ in 0..opts.power_iters.max(1) {
            let ha = model.hvp_raw(wa, Split::Train, &full_batch, &v)?;
            let hb = model.hvp_raw(wb, Split::Train, &full_batch, &v)?;
            let dv = numerics::sub(&ha, &hb)?;
            let nn = norm2(&dv);
            est = nn;
            if nn == 0.0 {
                break;
            }
            v = dv;
            numerics::scale(1.0 / nn, &mut v);
        }
        hessian_lipschitz = hessian_lipschitz.max(est / dist);
    }

    Ok(AssumptionConstants {
        grad_lipschitz,
        curvature_floor,
        grad_noise: grad_var.sqrt(),
        hessian_noise: hessian_var.sqrt(),
        hessian_lipschitz,
        probe_count: probes.len(),
        gradient_samples: n * probes.len(),
        hessian_samples: sigma_count * probes.len(),
    })
}
