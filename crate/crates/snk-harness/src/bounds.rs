//! One-step error-bound verification on sampled quadratics.
//!
//! For each probe distance δ the checker places `w = w* + δ·u` for a random
//! unit direction, draws independent (gradient batch, Hessian subsample)
//! pairs, executes a single step of the method under test, and compares the
//! Monte Carlo mean of `‖w_next − w*‖` against the predicted envelope
//! `c₀ + c₁δ + c₂δ²`. The constants are assembled from empirically estimated
//! smoothness/noise quantities plus spectral oracles computed from the known
//! mean Hessian. A violation is declared only when the sample mean exceeds
//! the envelope by more than three standard errors.
//!
//! Checks are restricted to quadratics with the minimizer at the origin and
//! a positive semidefinite mean: there the damped solve and the raw
//! minimizer agree, every constant is computable to certification quality,
//! and the curvature floor of the subsampled Hessians is controlled.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use snk_core::constants::{estimate_assumption_constants, AssumptionConstants, ConstantsOptions};
use snk_core::krylov::{cg_solve, gmres_solve, minres_solve, KrylovOptions, KrylovTermination};
use snk_core::lowrank::{randomized_eig, smw_solve};
use snk_core::model::{
    sample_batch, BatchHessianOperator, DifferentiableModel, QuadraticProblem, Split,
};
use snk_core::numerics::{self, format_f64, norm2, parse_f64, sym_eig, DenseMatrix, SeededRng};
use snk_core::optimizer::{AlphaPolicy, OptimizerConfig};
use snk_core::{CoreError, CoreResult};

use crate::experiment::ProblemSpec;

/// Independent full-gradient draws behind the stationary-gradient-noise
/// estimate.
const STATIONARY_GRAD_DRAWS: usize = 200;
/// Independent subsample draws behind the expected-eigenvalue estimates of
/// the low-rank check.
const SUBSAMPLE_EIG_DRAWS: usize = 30;
/// Probe points for the smoothness/noise constant estimation.
const CONSTANT_PROBES: usize = 4;

/// Which one-step method (and matching error envelope) to verify.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    /// Newton-CG with gradient-norm forcing `η = min(eta_max, ‖g‖)`.
    Forcing,
    /// Low-rank Newton with the spectrum flip (exercised here on PSD
    /// operators, where the flip is a no-op by construction).
    LowRank,
    /// Newton-CG at a constant forcing tolerance; the envelope carries the
    /// Chebyshev contraction of CG on the regularized spectrum.
    Cg,
    /// Newton-MINRES at a constant forcing tolerance.
    Minres,
    /// Newton-GMRES at a constant forcing tolerance.
    Gmres,
}

impl BoundKind {
    pub fn name(&self) -> &'static str {
        match self {
            BoundKind::Forcing => "newton-forcing",
            BoundKind::LowRank => "low-rank-newton",
            BoundKind::Cg => "newton-cg",
            BoundKind::Minres => "newton-minres",
            BoundKind::Gmres => "newton-gmres",
        }
    }

    pub fn all() -> [BoundKind; 5] {
        [
            BoundKind::Forcing,
            BoundKind::LowRank,
            BoundKind::Cg,
            BoundKind::Minres,
            BoundKind::Gmres,
        ]
    }
}

/// Every ingredient of the envelope, reported alongside the verdicts.
#[derive(Debug, Clone, Serialize)]
pub struct BoundConstants {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    /// v̂: per-sample gradient noise at the probe radius.
    pub grad_noise: f64,
    /// σ̂: per-sample Hessian noise.
    pub hessian_noise: f64,
    /// L̂: gradient Lipschitz bound (largest subsampled-Hessian eigenvalue
    /// magnitude observed).
    pub grad_lipschitz: f64,
    /// M̂: Hessian Lipschitz estimate (≈ 0 on quadratics).
    pub hessian_lipschitz: f64,
    /// ε̂_H: most negative subsampled curvature observed.
    pub curvature_floor: f64,
    /// μ̂: min of the regularized mean Hessian's norm inverse and its
    /// inverse's norm.
    pub inverse_norm_bound: f64,
    /// κ̂: condition number of the regularized mean Hessian.
    pub condition_number: f64,
    /// ε̂_g: mean full-batch-gradient norm at the minimizer.
    pub stationary_grad_norm: f64,
    /// Expected r-th / (r+1)-th subsampled eigenvalue (low-rank check only).
    pub lambda_r: f64,
    pub lambda_r_next: f64,
    /// Inner-solver error amplification factor ℰ for the kind (1 when the
    /// envelope has no such factor).
    pub solver_error_factor: f64,
    /// Krylov iteration count the contraction terms were evaluated at (the
    /// minimum observed across all trials; 0 for non-Krylov envelopes).
    pub krylov_iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct DistanceCheck {
    pub distance: f64,
    pub trials: usize,
    pub empirical_mean: f64,
    pub std_error: f64,
    pub bound: f64,
    pub violated: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundCheckReport {
    pub bound: BoundKind,
    pub constants: BoundConstants,
    pub checks: Vec<DistanceCheck>,
    pub violations: usize,
}

/// CLI-facing description of a bound-verification experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSpec {
    pub problem: ProblemSpec,
    pub config: OptimizerConfig,
    #[serde(default = "default_bounds")]
    pub bounds: Vec<BoundKind>,
    pub trials: usize,
    pub distances: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn default_bounds() -> Vec<BoundKind> {
    BoundKind::all().to_vec()
}

impl BoundSpec {
    pub fn load(path: &std::path::Path) -> CoreResult<Self> {
        let text = std::fs::read_to_string(path)?;
        let spec: Self = serde_json::from_str(&text).map_err(CoreError::Json)?;
        Ok(spec)
    }
}

/// `T_r(x)` ratio `T_r(num)/T_r(den)` for arguments ≥ 1, evaluated in log
/// space so large degrees cannot overflow:
/// `T_r(x) = cosh(r·acosh x) = e^t (1 + e^{−2t}) / 2` with `t = r·acosh x`.
fn chebyshev_ratio(r: usize, num_x: f64, den_x: f64) -> f64 {
    debug_assert!(num_x >= 1.0 && den_x >= 1.0);
    let tn = r as f64 * num_x.acosh();
    let td = r as f64 * den_x.acosh();
    (tn - td).exp() * (1.0 + (-2.0 * tn).exp()) / (1.0 + (-2.0 * td).exp())
}

fn fixed_alpha(cfg: &OptimizerConfig) -> CoreResult<f64> {
    match cfg.alpha_policy {
        AlphaPolicy::Fixed { alpha } => Ok(alpha),
        AlphaPolicy::LineSearch { .. } => Err(CoreError::InvalidArgument(
            "bound verification needs a fixed step size (the envelopes are \
             stated for constant α)"
                .into(),
        )),
    }
}

/// Dense subsampled raw Hessian, assembled column-by-column.
fn dense_subsampled_hessian(
    problem: &QuadraticProblem,
    w: &[f64],
    batch: &snk_core::model::Batch,
) -> CoreResult<DenseMatrix> {
    let d = problem.dim();
    let mut e = vec![0.0; d];
    let mut cols = Vec::with_capacity(d);
    for j in 0..d {
        e[j] = 1.0;
        cols.push(problem.hvp_raw(w, Split::Train, batch, &e)?);
        e[j] = 0.0;
    }
    let mut h = DenseMatrix::from_columns(&cols)?;
    h.symmetrize();
    Ok(h)
}

struct TrialDraws {
    /// Smallest Krylov iteration count observed (usize::MAX until a Krylov
    /// trial runs).
    min_iterations: usize,
}

/// One step of the method under test from `w`; returns the next iterate.
fn one_step(
    problem: &QuadraticProblem,
    kind: BoundKind,
    cfg: &OptimizerConfig,
    alpha: f64,
    w: &[f64],
    rng: &mut SeededRng,
    draws: &mut TrialDraws,
) -> CoreResult<Vec<f64>> {
    let n_train = problem.num_samples(Split::Train);
    let x = sample_batch(rng, n_train, cfg.n_x, false)?;
    let s = x.subsample(cfg.n_s, rng)?;
    let g = problem.gradient(w, Split::Train, &x)?;

    let p = match kind {
        BoundKind::LowRank => {
            let op = BatchHessianOperator::raw(problem, w, Split::Train, &s);
            let factor = randomized_eig(&op, cfg.rank, cfg.oversample, rng)?;
            smw_solve(&factor, cfg.gamma, &g, true)?
        }
        _ => {
            let op = BatchHessianOperator::regularized(problem, w, Split::Train, &s);
            let b: Vec<f64> = g.iter().map(|x| -x).collect();
            // The gradient-norm-forcing envelope presumes the inner solve
            // terminated at its tolerance, so that kind always gets enough
            // iterations; the constant-tolerance kinds may truncate (their
            // envelopes carry the iteration count explicitly).
            let (eta, max_iter) = match kind {
                BoundKind::Forcing => (cfg.eta_max.min(norm2(&g)), 4 * problem.dim()),
                _ => (
                    cfg.eta_const,
                    cfg.max_inner.unwrap_or(4 * problem.dim()),
                ),
            };
            let opts = KrylovOptions::new(eta).with_max_iter(max_iter);
            let out = match kind {
                BoundKind::Forcing | BoundKind::Cg => cg_solve(&op, &b, &opts)?,
                BoundKind::Minres => minres_solve(&op, &b, &opts)?,
                BoundKind::Gmres => gmres_solve(&op, &b, &opts)?,
                BoundKind::LowRank => unreachable!("handled by the outer match"),
            };
            if kind == BoundKind::Forcing && out.termination != KrylovTermination::Tolerance {
                return Err(CoreError::InvalidArgument(format!(
                    "forcing-envelope check requires tolerance-terminated inner \
                     solves; got {} after {} iterations",
                    out.termination.as_str(),
                    out.iterations
                )));
            }
            if matches!(kind, BoundKind::Cg | BoundKind::Minres | BoundKind::Gmres) {
                draws.min_iterations = draws.min_iterations.min(out.iterations);
            }
            out.step
        }
    };

    let mut w_next = w.to_vec();
    numerics::axpy(alpha, &p, &mut w_next);
    Ok(w_next)
}

#[allow(clippy::too_many_arguments)]
fn assemble_constants(
    kind: BoundKind,
    est: &AssumptionConstants,
    cfg: &OptimizerConfig,
    alpha: f64,
    dim: usize,
    mean_eig_max: f64,
    mean_eig_min: f64,
    stationary_grad_norm: f64,
    lambda_r: f64,
    lambda_r_next: f64,
    krylov_iterations: usize,
) -> CoreResult<BoundConstants> {
    let gamma = cfg.gamma;
    let sqrt_nx = (cfg.n_x as f64).sqrt();
    let sqrt_ns = (cfg.n_s as f64).sqrt();
    let v = est.grad_noise;
    let sigma = est.hessian_noise;
    let l = est.grad_lipschitz;
    let m = est.hessian_lipschitz;
    let eps_h = est.curvature_floor;
    let margin = gamma - eps_h;
    if margin <= 0.0 {
        return Err(CoreError::InvalidArgument(format!(
            "bound verification needs gamma > estimated curvature floor \
             (gamma {gamma}, floor {eps_h})"
        )));
    }
    let mu = (1.0 / (mean_eig_max + gamma)).min(1.0 / (mean_eig_min + gamma));
    let kappa = (mean_eig_max + gamma) / (mean_eig_min + gamma);
    let bias = l * (1.0 - alpha).abs();
    let r = krylov_iterations;

    let (c0, c1, c2, solver_error_factor) = match kind {
        BoundKind::Forcing => {
            let c0 = alpha * (v / sqrt_nx) * (1.0 + v / sqrt_nx) / margin;
            let c1 = (bias + sigma / sqrt_ns + 2.0 * alpha * v * mu / sqrt_nx) / margin;
            let c2 = (m / 2.0 + alpha * mu * mu) / margin;
            (c0, c1, c2, 1.0)
        }
        BoundKind::LowRank => {
            let denom = (lambda_r + gamma).abs();
            let sketch = 1.0
                + 4.0 * (dim as f64 * (cfg.rank + cfg.oversample) as f64).sqrt()
                    / (cfg.oversample as f64 - 1.0);
            let c0 = alpha * v / (denom * sqrt_nx);
            let c1 = (bias + sketch * lambda_r_next.abs() + gamma + sigma / sqrt_ns) / denom;
            let c2 = m / (2.0 * denom);
            (c0, c1, c2, sketch)
        }
        BoundKind::Cg => {
            let sqrt_kappa = kappa.sqrt();
            let contraction = ((sqrt_kappa - 1.0) / (sqrt_kappa + 1.0)).powi(r as i32);
            let cg_term = 2.0 * alpha * l * sqrt_kappa * contraction;
            let c0 = alpha * v / (margin * sqrt_nx);
            let c1 = (bias + sigma / sqrt_ns + cg_term) / margin;
            let c2 = m / (2.0 * margin);
            (c0, c1, c2, 1.0)
        }
        BoundKind::Minres | BoundKind::Gmres => {
            let factor = if kind == BoundKind::Minres {
                let base = (1.0 - (margin / l) * (margin / l)).max(0.0);
                base.powf(r as f64 / 2.0)
            } else {
                // CG-style interval envelope for GMRES on the regularized
                // spectrum [margin, L]: half-width, center, and a numerator
                // argument widened by the curvature floor.
                let half_width = (l - gamma + eps_h) / 2.0;
                if half_width <= 0.0 {
                    0.0
                } else {
                    let center = (l + gamma - eps_h) / 2.0;
                    let widened = (l - gamma + eps_h) + 2.0 * eps_h;
                    (l / margin)
                        * chebyshev_ratio(r, widened / half_width, center / half_width)
                }
            };
            let c0 =
                alpha * (v / sqrt_nx + stationary_grad_norm * factor / margin) / margin;
            let c1 = (bias + sigma / sqrt_ns + alpha * l * factor / margin) / margin;
            let c2 = m / (2.0 * margin);
            (c0, c1, c2, factor)
        }
    };

    Ok(BoundConstants {
        c0,
        c1,
        c2,
        grad_noise: v,
        hessian_noise: sigma,
        grad_lipschitz: l,
        hessian_lipschitz: m,
        curvature_floor: eps_h,
        inverse_norm_bound: mu,
        condition_number: kappa,
        stationary_grad_norm,
        lambda_r,
        lambda_r_next,
        solver_error_factor,
        krylov_iterations: if r == usize::MAX { 0 } else { r },
    })
}

/// Verify one method's one-step error envelope on a sampled quadratic.
/// Deterministic given (problem, cfg, kind, trials, distances); all
/// randomness derives from `cfg.seed`.
pub fn verify_bound(
    problem: &QuadraticProblem,
    cfg: &OptimizerConfig,
    kind: BoundKind,
    trials: usize,
    distances: &[f64],
) -> CoreResult<BoundCheckReport> {
    cfg.validate()?;
    let alpha = fixed_alpha(cfg)?;
    let d = problem.dim();
    let n_train = problem.num_samples(Split::Train);
    if trials < 2 {
        return Err(CoreError::InvalidArgument(format!(
            "bound verification needs at least 2 trials, got {trials}"
        )));
    }
    if distances.is_empty() || distances.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(CoreError::InvalidArgument(
            "bound verification needs finite positive distances".into(),
        ));
    }
    if problem.spectrum().iter().any(|&l| l < 0.0) {
        return Err(CoreError::InvalidArgument(
            "bound verification needs a positive semidefinite mean spectrum".into(),
        ));
    }
    if problem.w_star().iter().any(|&x| x != 0.0) {
        return Err(CoreError::InvalidArgument(
            "bound verification needs the minimizer at the origin (the damped \
             solve and the raw minimizer coincide there)"
                .into(),
        ));
    }
    if cfg.n_x > n_train {
        return Err(CoreError::InvalidArgument(format!(
            "gradient batch n_x={} exceeds the training split ({n_train})",
            cfg.n_x
        )));
    }
    if cfg.rank > d {
        return Err(CoreError::InvalidArgument(format!(
            "rank {} exceeds the dimension {d}",
            cfg.rank
        )));
    }

    let mut rng = SeededRng::new(cfg.seed);
    let w_star = problem.w_star().to_vec();
    let delta_max = distances.iter().cloned().fold(0.0, f64::max);

    // Smoothness/noise constants, probed on the sphere of the largest
    // distance so the gradient-noise estimate covers every tested radius.
    let probes: Vec<Vec<f64>> = (0..CONSTANT_PROBES)
        .map(|_| {
            let u = rng.unit_vector(d);
            let mut w = w_star.clone();
            numerics::axpy(delta_max, &u, &mut w);
            w
        })
        .collect();
    let opts = ConstantsOptions {
        rank: cfg.rank.min(d),
        oversample: cfg.oversample,
        subsample: cfg.n_s,
        hessian_draws: 4,
        sigma_samples: 0,
        power_iters: 30,
    };
    let est = estimate_assumption_constants(problem, &probes, &opts, &mut rng)?;

    // Spectral oracles from the known mean Hessian.
    let (mean_eigs, _) = sym_eig(problem.mean_hessian())?;
    let mean_eig_max = mean_eigs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mean_eig_min = mean_eigs.iter().cloned().fold(f64::INFINITY, f64::min);

    // Gradient noise at the minimizer (zero by construction at the origin;
    // measured, not assumed).
    let mut stationary_sum = 0.0;
    for _ in 0..STATIONARY_GRAD_DRAWS {
        let x = sample_batch(&mut rng, n_train, cfg.n_x, false)?;
        let g = problem.gradient(&w_star, Split::Train, &x)?;
        stationary_sum += norm2(&g);
    }
    let stationary_grad_norm = stationary_sum / STATIONARY_GRAD_DRAWS as f64;

    // Expected subsampled eigenvalues at the retained-rank boundary.
    let (mut lambda_r, mut lambda_r_next) = (0.0, 0.0);
    if kind == BoundKind::LowRank {
        for _ in 0..SUBSAMPLE_EIG_DRAWS {
            let s = sample_batch(&mut rng, n_train, cfg.n_s, false)?;
            let h = dense_subsampled_hessian(problem, &w_star, &s)?;
            let (vals, _) = sym_eig(&h)?;
            lambda_r += vals[cfg.rank - 1];
            lambda_r_next += vals.get(cfg.rank).copied().unwrap_or(0.0);
        }
        lambda_r /= SUBSAMPLE_EIG_DRAWS as f64;
        lambda_r_next /= SUBSAMPLE_EIG_DRAWS as f64;
    }

    // Monte Carlo trials: fixed placement per distance, independent batch
    // draws per trial.
    let mut draws = TrialDraws {
        min_iterations: usize::MAX,
    };
    let mut raw_checks: Vec<(f64, Vec<f64>)> = Vec::with_capacity(distances.len());
    for &delta in distances {
        let u = rng.unit_vector(d);
        let mut w = w_star.clone();
        numerics::axpy(delta, &u, &mut w);
        let mut errors = Vec::with_capacity(trials);
        for _ in 0..trials {
            let w_next = one_step(problem, kind, cfg, alpha, &w, &mut rng, &mut draws)?;
            let diff = numerics::sub(&w_next, &w_star)?;
            errors.push(norm2(&diff));
        }
        raw_checks.push((delta, errors));
    }

    let constants = assemble_constants(
        kind,
        &est,
        cfg,
        alpha,
        d,
        mean_eig_max,
        mean_eig_min,
        stationary_grad_norm,
        lambda_r,
        lambda_r_next,
        draws.min_iterations,
    )?;

    let mut checks = Vec::with_capacity(raw_checks.len());
    let mut violations = 0;
    for (delta, errors) in raw_checks {
        let n = errors.len();
        let mean = errors.iter().sum::<f64>() / n as f64;
        let var = errors
            .iter()
            .map(|e| (e - mean) * (e - mean))
            .sum::<f64>()
            / (n - 1) as f64;
        let std_error = (var / n as f64).sqrt();
        let bound = constants.c0 + constants.c1 * delta + constants.c2 * delta * delta;
        let violated = mean - 3.0 * std_error > bound;
        if violated {
            violations += 1;
        }
        checks.push(DistanceCheck {
            distance: delta,
            trials: n,
            empirical_mean: mean,
            std_error,
            bound,
            violated,
        });
    }

    Ok(BoundCheckReport {
        bound: kind,
        constants,
        checks,
        violations,
    })
}

pub const BOUND_REPORT_HEADER: &str =
    "bound,distance,trials,empirical_mean,std_error,bound_value,violated";

/// Flatten reports into the per-distance verdict CSV.
pub fn bound_reports_to_csv(reports: &[BoundCheckReport]) -> String {
    let mut out = String::from(BOUND_REPORT_HEADER);
    out.push('\n');
    for report in reports {
        for check in &report.checks {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                report.bound.name(),
                format_f64(check.distance),
                check.trials,
                format_f64(check.empirical_mean),
                format_f64(check.std_error),
                format_f64(check.bound),
                check.violated,
            ));
        }
    }
    out
}

/// Parse the verdict CSV back into (bound name, check) rows.
pub fn parse_bound_report_csv(text: &str) -> CoreResult<Vec<(String, DistanceCheck)>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == BOUND_REPORT_HEADER => {}
        other => {
            return Err(CoreError::Parse {
                what: "bound report header".into(),
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
        if fields.len() != 7 {
            return Err(CoreError::Parse {
                what: "bound report row".into(),
                line: line_no,
                detail: format!("expected 7 fields, got {}", fields.len()),
            });
        }
        let trials = fields[2].parse().map_err(|_| CoreError::Parse {
            what: "bound report trials".into(),
            line: line_no,
            detail: format!("got `{}`", fields[2]),
        })?;
        let violated = match fields[6] {
            "true" => true,
            "false" => false,
            other => {
                return Err(CoreError::Parse {
                    what: "bound report violated".into(),
                    line: line_no,
                    detail: format!("got `{other}`"),
                })
            }
        };
        rows.push((
            fields[0].to_string(),
            DistanceCheck {
                distance: parse_f64(fields[1], "bound report distance", line_no)?,
                trials,
                empirical_mean: parse_f64(fields[3], "bound report mean", line_no)?,
                std_error: parse_f64(fields[4], "bound report std_error", line_no)?,
                bound: parse_f64(fields[5], "bound report value", line_no)?,
                violated,
            },
        ));
    }
    Ok(rows)
}

/// Human-readable table of a report for terminal output.
pub fn render_report(report: &BoundCheckReport) -> String {
    let c = &report.constants;
    let mut out = format!(
        "{}: c0={:.3e} c1={:.3e} c2={:.3e} (v={:.3e} sigma={:.3e} L={:.3e} \
         M={:.3e} eps_H={:.3e} mu={:.3e} kappa={:.3e} eps_g={:.3e} r={})\n",
        report.bound.name(),
        c.c0,
        c.c1,
        c.c2,
        c.grad_noise,
        c.hessian_noise,
        c.grad_lipschitz,
        c.hessian_lipschitz,
        c.curvature_floor,
        c.inverse_norm_bound,
        c.condition_number,
        c.stationary_grad_norm,
        c.krylov_iterations,
    );
    for check in &report.checks {
        out.push_str(&format!(
            "  delta={:<8} mean={:.6e} (3se={:.1e})  bound={:.6e}  {}\n",
            check.distance,
            check.empirical_mean,
            3.0 * check.std_error,
            check.bound,
            if check.violated { "VIOLATED" } else { "ok" },
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise_free_problem(dim: usize) -> QuadraticProblem {
        let spec = ProblemSpec::Quadratic {
            dim,
            spectrum: None,
            lambda_max: 2.0,
            decay: 0.5,
            random_basis: true,
            sigma_h: 0.0,
            n_train: 32,
            n_test: Some(8),
            gamma: 0.1,
            w_star: None,
            problem_seed: 21,
        };
        spec.build_quadratic().unwrap()
    }

    fn fixed_cfg(alpha: f64) -> OptimizerConfig {
        serde_json::from_value(serde_json::json!({
            "method": "lrsfn",
            "gamma": 0.1,
            "rank": 4,
            "oversample": 4,
            "n_x": 16,
            "n_s": 8,
            "max_sweeps": 1.0,
            "seed": 5,
            "eta_max": 1e-6,
            "eta_const": 1e-10,
            "max_inner": 5,
            "alpha_policy": {"kind": "fixed", "alpha": alpha}
        }))
        .unwrap()
    }

    #[test]
    fn noise_free_quadratic_never_violates_any_envelope() {
        let problem = noise_free_problem(8);
        let cfg = fixed_cfg(1.0);
        for kind in BoundKind::all() {
            let report =
                verify_bound(&problem, &cfg, kind, 50, &[0.01, 0.1, 1.0]).unwrap();
            assert_eq!(
                report.violations,
                0,
                "{}: {:?}",
                kind.name(),
                report.checks
            );
        }
    }

    #[test]
    fn one_step_error_is_smallest_at_unit_step_on_noise_free_quadratic() {
        let problem = noise_free_problem(8);
        let mut means = Vec::new();
        for alpha in [0.25, 0.5, 1.0] {
            let mut cfg = fixed_cfg(alpha);
            cfg.max_inner = Some(64);
            cfg.eta_const = 1e-12;
            let report = verify_bound(&problem, &cfg, BoundKind::Cg, 10, &[0.1]).unwrap();
            means.push(report.checks[0].empirical_mean);
        }
        assert!(means[2] < means[1], "alpha=1 ({}) vs 0.5 ({})", means[2], means[1]);
        assert!(means[1] < means[0], "alpha=0.5 ({}) vs 0.25 ({})", means[1], means[0]);
    }

    #[test]
    fn envelope_inputs_are_validated() {
        let problem = noise_free_problem(6);
        let cfg = fixed_cfg(1.0);
        assert!(verify_bound(&problem, &cfg, BoundKind::Cg, 1, &[0.1]).is_err());
        assert!(verify_bound(&problem, &cfg, BoundKind::Cg, 10, &[]).is_err());
        assert!(verify_bound(&problem, &cfg, BoundKind::Cg, 10, &[-1.0]).is_err());

        let mut ls = fixed_cfg(1.0);
        ls.alpha_policy = AlphaPolicy::LineSearch { alpha0: 1.0 };
        assert!(verify_bound(&problem, &ls, BoundKind::Cg, 10, &[0.1]).is_err());

        let indefinite = ProblemSpec::Quadratic {
            dim: 4,
            spectrum: Some(vec![1.0, 0.5, -0.25, 0.1]),
            lambda_max: 1.0,
            decay: 0.9,
            random_basis: false,
            sigma_h: 0.0,
            n_train: 8,
            n_test: Some(2),
            gamma: 0.1,
            w_star: None,
            problem_seed: 0,
        }
        .build_quadratic()
        .unwrap();
        assert!(verify_bound(&indefinite, &fixed_cfg(1.0), BoundKind::Cg, 10, &[0.1]).is_err());

        let shifted = ProblemSpec::Quadratic {
            dim: 4,
            spectrum: None,
            lambda_max: 1.0,
            decay: 0.9,
            random_basis: false,
            sigma_h: 0.0,
            n_train: 8,
            n_test: Some(2),
            gamma: 0.1,
            w_star: Some(vec![1.0, 0.0, 0.0, 0.0]),
            problem_seed: 0,
        }
        .build_quadratic()
        .unwrap();
        assert!(verify_bound(&shifted, &fixed_cfg(1.0), BoundKind::Cg, 10, &[0.1]).is_err());
    }

    #[test]
    fn chebyshev_ratio_is_one_at_equal_arguments_and_grows_with_numerator() {
        assert!((chebyshev_ratio(7, 1.5, 1.5) - 1.0).abs() < 1e-12);
        let low = chebyshev_ratio(9, 1.2, 1.1);
        let high = chebyshev_ratio(9, 2.0, 1.1);
        assert!(high > low && low > 1.0);
        // Degrees where each polynomial value alone overflows f64 stay
        // finite in log space as long as the ratio itself is moderate.
        let huge_degree = chebyshev_ratio(16000, 1.0012, 1.001);
        assert!(huge_degree.is_finite() && huge_degree > 1.0);
    }

    #[test]
    fn report_csv_round_trips() {
        let problem = noise_free_problem(6);
        let cfg = fixed_cfg(1.0);
        let report = verify_bound(&problem, &cfg, BoundKind::Minres, 5, &[0.1, 1.0]).unwrap();
        let csv = bound_reports_to_csv(&[report]);
        let rows = parse_bound_report_csv(&csv).unwrap();
        assert_eq!(rows.len(), 2);
        let reconstructed = {
            let mut out = String::from(BOUND_REPORT_HEADER);
            out.push('\n');
            for (name, check) in &rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    name,
                    format_f64(check.distance),
                    check.trials,
                    format_f64(check.empirical_mean),
                    format_f64(check.std_error),
                    format_f64(check.bound),
                    check.violated,
                ));
            }
            out
        };
        assert_eq!(csv, reconstructed);
    }

    #[test]
    fn determinism_same_seed_same_report() {
        let problem = noise_free_problem(6);
        let cfg = fixed_cfg(0.5);
        let a = verify_bound(&problem, &cfg, BoundKind::LowRank, 8, &[0.1]).unwrap();
        let b = verify_bound(&problem, &cfg, BoundKind::LowRank, 8, &[0.1]).unwrap();
        assert_eq!(
            a.checks[0].empirical_mean.to_bits(),
            b.checks[0].empirical_mean.to_bits()
        );
        assert_eq!(a.constants.c1.to_bits(), b.constants.c1.to_bits());
    }
}
