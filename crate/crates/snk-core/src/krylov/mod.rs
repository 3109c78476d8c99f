//! Matrix-free Krylov solvers for the regularized batch Hessian system
//! `H p = b` with `p₀ = 0`: conjugate gradients, MINRES, and GMRES without
//! restarts. All three share a relative stopping rule `‖r_m‖ ≤ η‖b‖`,
//! monitor curvature along the way, and bail out early with a usable step
//! when they see a negative-curvature direction.
//!
//! Every iteration costs exactly one operator application, which the
//! operator's model meters as two per-sample sweeps; the outcome records
//! both the iteration count and the application count so cost accounting
//! stays exact even on early exits.

use crate::numerics::{self, dot_unchecked, norm2, LinearOperator, SeededRng};
use crate::{CoreError, CoreResult};

/// CG declares negative curvature at `dᵀHd ≤ CG_CURVATURE_RTOL·‖d‖²`. The
/// positive tolerance deliberately sweeps in exactly-singular directions
/// (`dᵀHd = 0`), which are just as unusable for the CG step formula.
const CG_CURVATURE_RTOL: f64 = 1e-12;

/// MINRES/GMRES declare negative curvature when a unit basis vector's
/// Rayleigh quotient drops to `−UNIT_CURVATURE_TOL` or below; these solvers
/// tolerate singular directions, so zero stays on the "keep going" side.
const UNIT_CURVATURE_TOL: f64 = 1e-12;

/// Relative threshold for Lanczos/Arnoldi happy breakdown (subspace
/// exhausted).
const HAPPY_BREAKDOWN_RTOL: f64 = 1e-14;

/// Orthogonality defect that triggers the single re-orthogonalization pass
/// in GMRES, and the breakdown if the pass does not cure it.
const ORTH_DEFECT_TOL: f64 = 1e-8;

/// Inner-solve tolerance selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForcingSchedule {
    /// `η_k = min(eta_max, ‖g_k‖)`: loose solves far from a stationary
    /// point, tight solves near one.
    GradientNorm { eta_max: f64 },
    /// Fixed tolerance regardless of progress.
    Constant { eta_const: f64 },
}

impl ForcingSchedule {
    /// Default cap for the gradient-norm schedule.
    pub const DEFAULT_ETA_MAX: f64 = 0.5;
}

/// Tolerance for the next inner solve given the current gradient norm.
/// A zero gradient norm yields `η = 0` (solve to machine level) under the
/// gradient-norm schedule; the caller's stationarity test should fire first.
pub fn forcing_eta(schedule: &ForcingSchedule, grad_norm: f64) -> f64 {
    debug_assert!(grad_norm >= 0.0);
    match schedule {
        ForcingSchedule::GradientNorm { eta_max } => eta_max.min(grad_norm),
        ForcingSchedule::Constant { eta_const } => *eta_const,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KrylovTermination {
    Tolerance,
    MaxIterations,
    NegativeCurvature,
    Breakdown,
}

impl KrylovTermination {
    pub fn as_str(&self) -> &'static str {
        match self {
            KrylovTermination::Tolerance => "tolerance",
            KrylovTermination::MaxIterations => "max_iterations",
            KrylovTermination::NegativeCurvature => "negative_curvature",
            KrylovTermination::Breakdown => "breakdown",
        }
    }
}

#[derive(Debug, Clone)]
pub struct KrylovOptions {
    /// Relative residual tolerance: stop at `‖r‖ ≤ eta·‖b‖`.
    pub eta: f64,
    /// Iteration cap; `None` resolves to `min(d, 100)`.
    pub max_iter: Option<usize>,
    /// Record `‖r‖` per iteration (index 0 is `‖b‖`).
    pub record_history: bool,
}

impl KrylovOptions {
    pub fn new(eta: f64) -> Self {
        Self {
            eta,
            max_iter: None,
            record_history: false,
        }
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = Some(max_iter);
        self
    }

    pub fn with_history(mut self) -> Self {
        self.record_history = true;
        self
    }

    fn resolved_max_iter(&self, dim: usize) -> usize {
        self.max_iter.unwrap_or_else(|| dim.min(100))
    }

    fn validate(&self, op_dim: usize, b: &[f64]) -> CoreResult<()> {
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(CoreError::InvalidArgument(format!(
                "krylov eta must be finite and >= 0, got {}",
                self.eta
            )));
        }
        if b.len() != op_dim {
            return Err(CoreError::DimensionMismatch {
                context: "krylov right-hand side",
                expected: op_dim,
                got: b.len(),
            });
        }
        if !numerics::all_finite(b) {
            return Err(CoreError::InvalidArgument(
                "krylov right-hand side contains non-finite values".into(),
            ));
        }
        Ok(())
    }
}

/// Result of one inner solve. `min_rayleigh` is the most negative normalized
/// curvature `vᵀHv/vᵀv` observed along the probed directions, `+∞` if the
/// solve returned before probing any.
#[derive(Debug, Clone)]
pub struct KrylovOutcome {
    pub step: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub operator_applies: usize,
    pub termination: KrylovTermination,
    pub min_rayleigh: f64,
    pub residual_history: Option<Vec<f64>>,
}

impl KrylovOutcome {
    fn trivial(dim: usize, record_history: bool) -> Self {
        Self {
            step: vec![0.0; dim],
            residual_norm: 0.0,
            iterations: 0,
            operator_applies: 0,
            termination: KrylovTermination::Tolerance,
            min_rayleigh: f64::INFINITY,
            residual_history: record_history.then(|| vec![0.0]),
        }
    }
}

/// Steepest-descent fallback when negative curvature shows up before any
/// iterate exists: `p = b·min(1, ‖b‖²/|bᵀHb|)`, the Cauchy-like step along
/// `b` clamped to at most `b` itself.
fn zero_iterate_fallback(b: &[f64], bnorm: f64, b_hb: f64) -> Vec<f64> {
    let scale = if b_hb.abs() == 0.0 {
        1.0
    } else {
        (bnorm * bnorm / b_hb.abs()).min(1.0)
    };
    b.iter().map(|v| v * scale).collect()
}

/// Conjugate gradients with negative-curvature early termination.
///
/// Stops with `tolerance` at `‖r_m‖ ≤ η‖b‖`, with `negative_curvature` the
/// moment a search direction has `dᵀHd ≤ 1e-12·‖d‖²` (returning the current
/// iterate, or the clamped steepest-descent fallback if that happens before
/// the first update), with `max_iterations` at the cap, and with `breakdown`
/// if the recurrence turns non-finite (the last finite iterate is returned).
pub fn cg_solve<A: LinearOperator + ?Sized>(
    op: &A,
    b: &[f64],
    opts: &KrylovOptions,
) -> CoreResult<KrylovOutcome> {
    let dim = op.dim();
    opts.validate(dim, b)?;
    let max_iter = opts.resolved_max_iter(dim);
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(KrylovOutcome::trivial(dim, opts.record_history));
    }
    let target = opts.eta * bnorm;
    let mut history = opts.record_history.then(|| vec![bnorm]);

    let mut x = vec![0.0; dim];
    let mut r = b.to_vec();
    let mut dir = b.to_vec();
    let mut rr = bnorm * bnorm;
    let mut min_rayleigh = f64::INFINITY;
    let mut applies = 0usize;
    let mut iterations = 0usize;
    let mut termination = KrylovTermination::MaxIterations;
    let mut residual_norm = bnorm;

    for _ in 0..max_iter {
        let hd = op.apply(&dir)?;
        applies += 1;
        let dd = dot_unchecked(&dir, &dir);
        let dhd = dot_unchecked(&dir, &hd);
        min_rayleigh = min_rayleigh.min(dhd / dd);

        if dhd <= CG_CURVATURE_RTOL * dd {
            termination = KrylovTermination::NegativeCurvature;
            if iterations == 0 {
                x = zero_iterate_fallback(b, bnorm, dhd);
                // dir = b here, so hd = H b: the fallback residual is free.
                let s = if dhd.abs() == 0.0 {
                    1.0
                } else {
                    (bnorm * bnorm / dhd.abs()).min(1.0)
                };
                let mut resid = b.to_vec();
                numerics::axpy(-s, &hd, &mut resid);
                residual_norm = norm2(&resid);
            } else {
                residual_norm = rr.sqrt();
            }
            break;
        }

        let alpha = rr / dhd;
        if !alpha.is_finite() {
            termination = KrylovTermination::Breakdown;
            residual_norm = rr.sqrt();
            break;
        }
        let prev_x = x.clone();
        numerics::axpy(alpha, &dir, &mut x);
        numerics::axpy(-alpha, &hd, &mut r);
        let rr_new = dot_unchecked(&r, &r);
        if !rr_new.is_finite() {
            x = prev_x;
            termination = KrylovTermination::Breakdown;
            residual_norm = rr.sqrt();
            break;
        }
        iterations += 1;
        residual_norm = rr_new.sqrt();
        if let Some(h) = history.as_mut() {
            h.push(residual_norm);
        }
        if residual_norm <= target {
            termination = KrylovTermination::Tolerance;
            break;
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for (di, &ri) in dir.iter_mut().zip(&r) {
            *di = ri + beta * *di;
        }
    }

    Ok(KrylovOutcome {
        step: x,
        residual_norm,
        iterations,
        operator_applies: applies,
        termination,
        min_rayleigh,
        residual_history: history,
    })
}

/// MINRES: Lanczos tridiagonalization with Givens rotations, minimizing the
/// residual over the Krylov subspace. Works on symmetric indefinite
/// operators; negative curvature is detected from each Lanczos vector's
/// Rayleigh quotient (an interpretation — the basis vector, not the iterate
/// update). Lanczos breakdown with the residual already at tolerance is a
/// successful exact solve.
pub fn minres_solve<A: LinearOperator + ?Sized>(
    op: &A,
    b: &[f64],
    opts: &KrylovOptions,
) -> CoreResult<KrylovOutcome> {
    let dim = op.dim();
    opts.validate(dim, b)?;
    let max_iter = opts.resolved_max_iter(dim);
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(KrylovOutcome::trivial(dim, opts.record_history));
    }
    let target = opts.eta * bnorm;
    let mut history = opts.record_history.then(|| vec![bnorm]);

    let mut x = vec![0.0; dim];
    let mut v_prev = vec![0.0; dim];
    let mut v: Vec<f64> = b.iter().map(|e| e / bnorm).collect();
    let mut beta = bnorm;
    let (mut dbar, mut epsln, mut phibar) = (0.0f64, 0.0f64, bnorm);
    let (mut cs, mut sn) = (-1.0f64, 0.0f64);
    let mut d_km1 = vec![0.0; dim];
    let mut d_km2 = vec![0.0; dim];

    let mut min_rayleigh = f64::INFINITY;
    let mut applies = 0usize;
    let mut iterations = 0usize;
    let mut termination = KrylovTermination::MaxIterations;
    let mut residual_norm = bnorm;

    for _ in 0..max_iter {
        let av = op.apply(&v)?;
        applies += 1;
        let alfa = dot_unchecked(&v, &av); // ‖v‖ = 1: this is the Rayleigh quotient
        min_rayleigh = min_rayleigh.min(alfa);
        if alfa <= -UNIT_CURVATURE_TOL {
            termination = KrylovTermination::NegativeCurvature;
            if iterations == 0 {
                x = zero_iterate_fallback(b, bnorm, alfa * bnorm * bnorm);
                // x = c·b with c from the fallback; residual = b − c·bnorm·Av₁.
                let c = if alfa.abs() == 0.0 {
                    1.0
                } else {
                    (1.0 / alfa.abs()).min(1.0)
                };
                let mut resid = b.to_vec();
                numerics::axpy(-c * bnorm, &av, &mut resid);
                residual_norm = norm2(&resid);
            } else {
                residual_norm = phibar.abs();
            }
            break;
        }

        let mut y = av;
        numerics::axpy(-alfa, &v, &mut y);
        numerics::axpy(-beta, &v_prev, &mut y);
        let beta_new = norm2(&y);

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta_new;
        dbar = -cs * beta_new;
        let gamma = (gbar * gbar + beta_new * beta_new).sqrt().max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta_new / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let mut d_new = v.clone();
        numerics::axpy(-oldeps, &d_km2, &mut d_new);
        numerics::axpy(-delta, &d_km1, &mut d_new);
        numerics::scale(1.0 / gamma, &mut d_new);
        numerics::axpy(phi, &d_new, &mut x);
        d_km2 = std::mem::replace(&mut d_km1, d_new);

        iterations += 1;
        residual_norm = phibar.abs();
        if let Some(h) = history.as_mut() {
            h.push(residual_norm);
        }
        if !residual_norm.is_finite() || !numerics::all_finite(&x) {
            termination = KrylovTermination::Breakdown;
            break;
        }
        if residual_norm <= target {
            termination = KrylovTermination::Tolerance;
            break;
        }
        if beta_new <= HAPPY_BREAKDOWN_RTOL * bnorm {
            // Subspace exhausted: an exact solve if the residual agrees.
            termination = if residual_norm <= target.max(HAPPY_BREAKDOWN_RTOL * bnorm) {
                KrylovTermination::Tolerance
            } else {
                KrylovTermination::Breakdown
            };
            break;
        }
        numerics::scale(1.0 / beta_new, &mut y);
        v_prev = std::mem::replace(&mut v, y);
        beta = beta_new;
    }

    Ok(KrylovOutcome {
        step: x,
        residual_norm,
        iterations,
        operator_applies: applies,
        termination,
        min_rayleigh,
        residual_history: history,
    })
}

/// GMRES without restarts: Arnoldi with modified Gram–Schmidt plus one
/// conditional re-orthogonalization pass when the defect exceeds `1e-8`
/// (breakdown if the pass does not cure it). Negative curvature is detected
/// from each new Arnoldi vector's Rayleigh quotient, mirroring MINRES.
pub fn gmres_solve<A: LinearOperator + ?Sized>(
    op: &A,
    b: &[f64],
    opts: &KrylovOptions,
) -> CoreResult<KrylovOutcome> {
    let dim = op.dim();
    opts.validate(dim, b)?;
    let max_iter = opts.resolved_max_iter(dim);
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(KrylovOutcome::trivial(dim, opts.record_history));
    }
    let target = opts.eta * bnorm;
    let mut history = opts.record_history.then(|| vec![bnorm]);

    // Arnoldi basis, rotated Hessenberg columns (upper-triangular R), Givens
    // rotations, and the rotated right-hand side.
    let mut basis: Vec<Vec<f64>> = vec![b.iter().map(|e| e / bnorm).collect()];
    let mut r_cols: Vec<Vec<f64>> = Vec::new();
    let mut rotations: Vec<(f64, f64)> = Vec::new();
    let mut g: Vec<f64> = vec![bnorm];

    let mut min_rayleigh = f64::INFINITY;
    let mut applies = 0usize;
    let mut termination = KrylovTermination::MaxIterations;
    let mut completed = 0usize;
    let mut residual_norm = bnorm;

    // x_j from the first j columns: back-substitute R y = g, then x = V y.
    let reconstruct = |j: usize, r_cols: &[Vec<f64>], g: &[f64], basis: &[Vec<f64>]| {
        let mut y = vec![0.0; j];
        for i in (0..j).rev() {
            let mut acc = g[i];
            for k in (i + 1)..j {
                acc -= r_cols[k][i] * y[k];
            }
            y[i] = acc / r_cols[i][i];
        }
        let mut x = vec![0.0; dim];
        for (yi, vi) in y.iter().zip(basis) {
            numerics::axpy(*yi, vi, &mut x);
        }
        x
    };

    for j in 0..max_iter {
        let v_j = &basis[j];
        let av = op.apply(v_j)?;
        applies += 1;
        let av_norm = norm2(&av);
        let ray = dot_unchecked(v_j, &av); // unit basis vector
        min_rayleigh = min_rayleigh.min(ray);
        if ray <= -UNIT_CURVATURE_TOL {
            termination = KrylovTermination::NegativeCurvature;
            let x = if completed == 0 {
                let fallback = zero_iterate_fallback(b, bnorm, ray * bnorm * bnorm);
                let c = if ray.abs() == 0.0 {
                    1.0
                } else {
                    (1.0 / ray.abs()).min(1.0)
                };
                let mut resid = b.to_vec();
                numerics::axpy(-c * bnorm, &av, &mut resid);
                residual_norm = norm2(&resid);
                fallback
            } else {
                residual_norm = g[completed].abs();
                reconstruct(completed, &r_cols, &g, &basis)
            };
            return Ok(KrylovOutcome {
                step: x,
                residual_norm,
                iterations: completed,
                operator_applies: applies,
                termination,
                min_rayleigh,
                residual_history: history,
            });
        }

        // Modified Gram–Schmidt, with one re-orthogonalization pass if the
        // defect is above tolerance.
        let mut w = av;
        let mut h_col: Vec<f64> = Vec::with_capacity(j + 2);
        for vi in basis.iter() {
            let hij = dot_unchecked(vi, &w);
            numerics::axpy(-hij, vi, &mut w);
            h_col.push(hij);
        }
        let defect = |w: &[f64]| {
            basis
                .iter()
                .map(|vi| dot_unchecked(vi, w).abs())
                .fold(0.0f64, f64::max)
        };
        let defect_tol = ORTH_DEFECT_TOL * av_norm.max(f64::MIN_POSITIVE);
        if defect(&w) > defect_tol {
            for (vi, h) in basis.iter().zip(h_col.iter_mut()) {
                let c = dot_unchecked(vi, &w);
                numerics::axpy(-c, vi, &mut w);
                *h += c;
            }
            if defect(&w) > defect_tol {
                termination = KrylovTermination::Breakdown;
                residual_norm = g[completed].abs();
                let x = reconstruct(completed, &r_cols, &g, &basis);
                return Ok(KrylovOutcome {
                    step: x,
                    residual_norm,
                    iterations: completed,
                    operator_applies: applies,
                    termination,
                    min_rayleigh,
                    residual_history: history,
                });
            }
        }
        let h_next = norm2(&w);

        // Apply the accumulated rotations, then the new one.
        for (i, &(c, s)) in rotations.iter().enumerate() {
            let t = c * h_col[i] + s * h_col[i + 1];
            h_col[i + 1] = -s * h_col[i] + c * h_col[i + 1];
            h_col[i] = t;
        }
        let (c_new, s_new) = {
            let denom = (h_col[j] * h_col[j] + h_next * h_next).sqrt();
            if denom == 0.0 {
                (1.0, 0.0)
            } else {
                (h_col[j] / denom, h_next / denom)
            }
        };
        h_col[j] = c_new * h_col[j] + s_new * h_next;
        rotations.push((c_new, s_new));
        g.push(-s_new * g[j]);
        g[j] *= c_new;
        r_cols.push(h_col);

        completed = j + 1;
        residual_norm = g[j + 1].abs();
        if let Some(h) = history.as_mut() {
            h.push(residual_norm);
        }
        if !residual_norm.is_finite() {
            termination = KrylovTermination::Breakdown;
            completed -= 1;
            residual_norm = g[completed].abs();
            break;
        }
        if residual_norm <= target {
            termination = KrylovTermination::Tolerance;
            break;
        }
        if h_next <= HAPPY_BREAKDOWN_RTOL * av_norm.max(f64::MIN_POSITIVE) {
            termination = if residual_norm <= target.max(HAPPY_BREAKDOWN_RTOL * bnorm) {
                KrylovTermination::Tolerance
            } else {
                KrylovTermination::Breakdown
            };
            break;
        }
        numerics::scale(1.0 / h_next, &mut w);
        basis.push(w);
    }

    let x = reconstruct(completed, &r_cols, &g, &basis);
    Ok(KrylovOutcome {
        step: x,
        residual_norm,
        iterations: completed,
        operator_applies: applies,
        termination,
        min_rayleigh,
        residual_history: history,
    })
}

/// Report of the Krylov-polynomial optimality diagnostic: the measured CG
/// error and GMRES residual against bounds evaluated from randomly sampled
/// polynomials with unit constant term.
#[derive(Debug, Clone)]
pub struct PolynomialCheckReport {
    /// `‖x* − x_m‖²_A` for the CG iterate.
    pub cg_error_sq: f64,
    /// Smallest sampled-polynomial value of `Σ λ_k q(λ_k)² (u_kᵀx*)²`.
    pub cg_min_sampled: f64,
    /// Measured error bounded by every sampled polynomial's value?
    pub cg_all_bounded: bool,
    /// `‖b − A x_m‖` for the GMRES iterate.
    pub gmres_residual: f64,
    /// Smallest sampled value of `‖q(A) b‖`.
    pub gmres_min_sampled: f64,
    pub gmres_all_bounded: bool,
    pub samples: usize,
}

/// Check the polynomial-optimality identities on a small dense symmetric
/// system: the CG iterate's A-norm error must undercut
/// `Σ_k λ_k q(λ_k)² (u_kᵀe₀)²` for every sampled degree-≤m polynomial with
/// `q(0) = 1`, and the GMRES residual must undercut `‖q(A)b‖` likewise.
/// Sampling cannot certify equality with the minimum, so only the
/// inequalities are asserted; the sampled minima are reported for
/// inspection.
pub fn krylov_polynomial_check(
    a: &crate::numerics::DenseMatrix,
    b: &[f64],
    m: usize,
    samples: usize,
    rng: &mut SeededRng,
) -> CoreResult<PolynomialCheckReport> {
    let d = a.rows();
    if d > 40 {
        return Err(CoreError::InvalidArgument(format!(
            "polynomial check is a dense diagnostic; d={d} exceeds the 40-dim cap"
        )));
    }
    if b.len() != d {
        return Err(CoreError::DimensionMismatch {
            context: "polynomial check right-hand side",
            expected: d,
            got: b.len(),
        });
    }
    if m == 0 || samples == 0 {
        return Err(CoreError::InvalidArgument(
            "polynomial check needs m >= 1 and samples >= 1".into(),
        ));
    }
    let (lam, vecs) = crate::numerics::sym_eig(a)?;
    if lam.iter().any(|&l| l <= 0.0) {
        return Err(CoreError::InvalidArgument(
            "polynomial check requires a positive definite matrix".into(),
        ));
    }
    // Exact solve through the eigendecomposition oracle.
    let coeffs = vecs.t_matvec(b)?;
    let scaled: Vec<f64> = coeffs.iter().zip(&lam).map(|(c, l)| c / l).collect();
    let x_star = vecs.matvec(&scaled)?;

    // m iterations of each solver (eta = 0 never triggers early).
    let opts = KrylovOptions::new(0.0).with_max_iter(m);
    let cg = cg_solve(a, b, &opts)?;
    let gm = gmres_solve(a, b, &opts)?;

    let err = numerics::sub(&x_star, &cg.step)?;
    let cg_error_sq = dot_unchecked(&err, &a.matvec(&err)?);
    let mut resid = b.to_vec();
    numerics::axpy(-1.0, &a.matvec(&gm.step)?, &mut resid);
    let gmres_residual = norm2(&resid);

    // Spectral coefficients of e₀ = x* (CG) and of b (GMRES).
    let e0_coeffs = vecs.t_matvec(&x_star)?;
    let b_coeffs = coeffs;
    let lam_max = lam[0].abs().max(1.0);

    let mut cg_min_sampled = f64::INFINITY;
    let mut gmres_min_sampled = f64::INFINITY;
    let mut cg_all_bounded = true;
    let mut gmres_all_bounded = true;
    // Slack for roundoff in evaluating the sampled sums.
    let slack = 1e-10;

    for _ in 0..samples {
        // q(λ) = 1 + Σ aᵢ λᵢ, coefficients scaled so |q| stays moderate on
        // the spectrum's range.
        let poly: Vec<f64> = (1..=m)
            .map(|i| rng.normal() / lam_max.powi(i as i32))
            .collect();
        let q = |l: f64| {
            let mut acc = 1.0;
            let mut pw = 1.0;
            for c in &poly {
                pw *= l;
                acc += c * pw;
            }
            acc
        };
        let cg_sum: f64 = lam
            .iter()
            .zip(&e0_coeffs)
            .map(|(&l, &c)| {
                let ql = q(l);
                l * ql * ql * c * c
            })
            .sum();
        let gm_sum: f64 = lam
            .iter()
            .zip(&b_coeffs)
            .map(|(&l, &c)| {
                let ql = q(l);
                ql * ql * c * c
            })
            .sum::<f64>()
            .sqrt();
        cg_min_sampled = cg_min_sampled.min(cg_sum);
        gmres_min_sampled = gmres_min_sampled.min(gm_sum);
        if cg_error_sq > cg_sum * (1.0 + slack) + slack {
            cg_all_bounded = false;
        }
        if gmres_residual > gm_sum * (1.0 + slack) + slack {
            gmres_all_bounded = false;
        }
    }

    Ok(PolynomialCheckReport {
        cg_error_sq,
        cg_min_sampled,
        cg_all_bounded,
        gmres_residual,
        gmres_min_sampled,
        gmres_all_bounded,
        samples,
    })
}
