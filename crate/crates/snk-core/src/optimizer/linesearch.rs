//! Backtracking line search with nonmonotone acceptance, the second-order
//! stationarity test, and the first-order baseline update rules.

use crate::model::{Batch, DifferentiableModel, Split};
use crate::numerics::{self, dot_unchecked, norm2};
use crate::optimizer::config::OptimizerConfig;
use crate::{CoreError, CoreResult};

pub const ARMIJO_C1: f64 = 1e-4;
pub const BACKTRACK_FACTOR: f64 = 0.5;
/// Backtracking trials after the initial step size (11 evaluations total).
pub const MAX_BACKTRACKS: usize = 10;

#[derive(Debug, Clone, Copy)]
pub struct LineSearchResult {
    pub alpha: f64,
    /// Trial loss evaluations performed (each metered as a half-sweep per
    /// sample by the model; excludes the caller's reference evaluation).
    pub evals: usize,
    /// Whether the sufficient-decrease test passed at `alpha`. When it never
    /// passes, the step is taken anyway at the last (smallest) trial.
    pub accepted: bool,
    /// Batch objective at `w + alpha·p`.
    pub loss: f64,
}

/// Backtrack from `alpha0` by halving until the sufficient-decrease test
/// `F̄(w+αp) ≤ F̄(w) + c₁·α·gᵀp` passes, for at most `MAX_BACKTRACKS`
/// halvings. If no trial passes, the last trial is returned anyway
/// (`accepted = false`), or the lowest-loss trial when `take_best` is set.
/// Non-finite trial losses shrink and continue; if every trial is
/// non-finite the step is rejected.
#[allow(clippy::too_many_arguments)]
pub fn line_search<M: DifferentiableModel + ?Sized>(
    model: &M,
    w: &[f64],
    p: &[f64],
    g: &[f64],
    split: Split,
    batch: &Batch,
    f0: f64,
    alpha0: f64,
    take_best: bool,
) -> CoreResult<LineSearchResult> {
    if !numerics::all_finite(p) {
        return Err(CoreError::InvalidArgument(
            "line search direction contains non-finite values".into(),
        ));
    }
    let slope = dot_unchecked(g, p);
    let mut alpha = alpha0;
    let mut evals = 0usize;
    let mut best: Option<(f64, f64)> = None;
    let mut last_finite: Option<(f64, f64)> = None;
    let mut wt = vec![0.0; w.len()];

    for _ in 0..=MAX_BACKTRACKS {
        wt.copy_from_slice(w);
        numerics::axpy(alpha, p, &mut wt);
        let f = model.loss(&wt, split, batch)?;
        evals += 1;
        if f.is_finite() {
            if f <= f0 + ARMIJO_C1 * alpha * slope {
                return Ok(LineSearchResult {
                    alpha,
                    evals,
                    accepted: true,
                    loss: f,
                });
            }
            last_finite = Some((alpha, f));
            if best.is_none_or(|(_, bf)| f < bf) {
                best = Some((alpha, f));
            }
        }
        alpha *= BACKTRACK_FACTOR;
    }

    let pick = if take_best { best } else { last_finite };
    match pick.or(best) {
        Some((alpha, loss)) => Ok(LineSearchResult {
            alpha,
            evals,
            accepted: false,
            loss,
        }),
        None => Err(CoreError::StepRejected {
            alpha: alpha0 * BACKTRACK_FACTOR.powi(MAX_BACKTRACKS as i32),
            step_norm: norm2(p),
            reason: "every line-search trial produced a non-finite loss".into(),
        }),
    }
}

/// Second-order stationarity: the gradient is small AND the most negative
/// curvature estimate is above `−eps_h`. First-order methods pass `+∞` for
/// the curvature estimate, reducing this to the gradient test.
pub fn check_stationary(grad_norm: f64, min_eig_est: f64, cfg: &OptimizerConfig) -> bool {
    grad_norm <= cfg.eps_g && min_eig_est >= -cfg.eps_h
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Per-method state for the first-order baselines. GD and SGD are
/// stateless; Adam carries bias-corrected first and second moments.
#[derive(Debug, Clone)]
pub enum BaselineState {
    Stateless,
    Adam { m: Vec<f64>, v: Vec<f64>, t: u32 },
}

impl BaselineState {
    pub fn new(adam: bool, dim: usize) -> Self {
        if adam {
            BaselineState::Adam {
                m: vec![0.0; dim],
                v: vec![0.0; dim],
                t: 0,
            }
        } else {
            BaselineState::Stateless
        }
    }
}

/// One first-order update. GD/SGD: `w − α·g`. Adam: bias-corrected moment
/// update with the standard constants.
pub fn baseline_step(state: &mut BaselineState, w: &[f64], g: &[f64], alpha: f64) -> Vec<f64> {
    match state {
        BaselineState::Stateless => {
            let mut next = w.to_vec();
            numerics::axpy(-alpha, g, &mut next);
            next
        }
        BaselineState::Adam { m, v, t } => {
            *t += 1;
            let bc1 = 1.0 - ADAM_BETA1.powi(*t as i32);
            let bc2 = 1.0 - ADAM_BETA2.powi(*t as i32);
            let mut next = w.to_vec();
            for i in 0..w.len() {
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                next[i] -= alpha * m_hat / (v_hat.sqrt() + ADAM_EPS);
            }
            next
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{QuadraticParams, QuadraticProblem};
    use crate::numerics::SeededRng;
    use crate::optimizer::config::{AlphaPolicy, Batching, ForcingMode, Method};

    fn test_config() -> OptimizerConfig {
        OptimizerConfig {
            method: Method::Gd,
            gamma: 0.1,
            rank: 2,
            oversample: 2,
            forcing: ForcingMode::GradientNorm,
            eta_max: 0.5,
            eta_const: 0.1,
            max_inner: None,
            alpha_policy: AlphaPolicy::Fixed { alpha: 0.1 },
            eps_g: 1e-3,
            eps_h: 1e-2,
            n_x: 4,
            n_s: 2,
            batching: Batching::SemiStochastic,
            max_sweeps: 100.0,
            seed: 1,
            warmup_gd_steps: None,
            init_scale: 1.0,
            ls_take_best: false,
            keep_iterates: false,
        }
    }

    /// One-dimensional quartic `F(w) = w⁴` with a single sample, used for a
    /// hand-checkable backtracking sequence.
    struct Quartic;

    impl DifferentiableModel for Quartic {
        fn dim(&self) -> usize {
            1
        }
        fn gamma(&self) -> f64 {
            0.0
        }
        fn num_samples(&self, _split: Split) -> usize {
            1
        }
        fn loss_raw(&self, w: &[f64], _split: Split, _batch: &Batch) -> CoreResult<f64> {
            Ok(w[0].powi(4))
        }
        fn gradient_raw(&self, w: &[f64], _split: Split, _batch: &Batch) -> CoreResult<Vec<f64>> {
            Ok(vec![4.0 * w[0].powi(3)])
        }
        fn hvp_raw(
            &self,
            w: &[f64],
            _split: Split,
            _batch: &Batch,
            v: &[f64],
        ) -> CoreResult<Vec<f64>> {
            Ok(vec![12.0 * w[0] * w[0] * v[0]])
        }
    }

    /// A model whose loss overflows for any |w| above a small ball — every
    /// line-search trial from far away is non-finite.
    struct Exploding;

    impl DifferentiableModel for Exploding {
        fn dim(&self) -> usize {
            1
        }
        fn gamma(&self) -> f64 {
            0.0
        }
        fn num_samples(&self, _split: Split) -> usize {
            1
        }
        fn loss_raw(&self, w: &[f64], _split: Split, _batch: &Batch) -> CoreResult<f64> {
            Ok(if w[0].abs() > 1e-3 { f64::NAN } else { 0.0 })
        }
        fn gradient_raw(&self, _w: &[f64], _split: Split, _batch: &Batch) -> CoreResult<Vec<f64>> {
            Ok(vec![1.0])
        }
        fn hvp_raw(
            &self,
            _w: &[f64],
            _split: Split,
            _batch: &Batch,
            _v: &[f64],
        ) -> CoreResult<Vec<f64>> {
            Ok(vec![0.0])
        }
    }

    #[test]
    fn newton_step_on_a_quadratic_accepts_alpha_one_immediately() {
        let mut rng = SeededRng::new(3);
        let params = QuadraticParams {
            dim: 5,
            spectrum: vec![5.0, 4.0, 3.0, 2.0, 1.0],
            random_basis: true,
            sigma_h: 0.0,
            n_train: 6,
            n_test: 2,
            gamma: 0.0,
            w_star: None,
        };
        let model = QuadraticProblem::new(&params, &mut rng).unwrap();
        let batch = Batch::full(6).unwrap();
        let w = rng.normal_vec(5);
        let g = model.gradient(&w, Split::Train, &batch).unwrap();
        // Exact Newton direction through the dense eigendecomposition.
        let (lam, vecs) = crate::numerics::sym_eig(model.mean_hessian()).unwrap();
        let coeffs = vecs.t_matvec(&g).unwrap();
        let scaled: Vec<f64> = coeffs.iter().zip(&lam).map(|(c, l)| -c / l).collect();
        let p = vecs.matvec(&scaled).unwrap();
        let f0 = model.loss(&w, Split::Train, &batch).unwrap();
        let res =
            line_search(&model, &w, &p, &g, Split::Train, &batch, f0, 1.0, false).unwrap();
        assert!(res.accepted);
        assert_eq!(res.alpha, 1.0);
        assert_eq!(res.evals, 1);
    }

    #[test]
    fn ascent_direction_is_taken_anyway_at_the_smallest_trial() {
        let mut rng = SeededRng::new(5);
        let model =
            QuadraticProblem::new(&QuadraticParams::isotropic(3, 4, 2.0), &mut rng).unwrap();
        let batch = Batch::full(4).unwrap();
        let w = vec![1.0, -2.0, 0.5];
        let g = model.gradient(&w, Split::Train, &batch).unwrap();
        let p = g.clone(); // ascent: +gradient
        let f0 = model.loss(&w, Split::Train, &batch).unwrap();
        let res =
            line_search(&model, &w, &p, &g, Split::Train, &batch, f0, 1.0, false).unwrap();
        assert!(!res.accepted);
        assert_eq!(res.evals, 11);
        assert!((res.alpha - 2f64.powi(-10)).abs() < 1e-18);
    }

    #[test]
    fn quartic_backtracking_matches_the_hand_oracle() {
        // F(w) = w⁴ at w = 1, p = −F′(1) = −4, slope gᵀp = −16.
        //   α = 1:    F(−3) = 81     > 1 − 1.6e-3        reject
        //   α = 0.5:  F(−1) = 1      > 1 − 8e-4          reject
        //   α = 0.25: F(0)  = 0      ≤ 1 − 4e-4          accept
        let model = Quartic;
        let batch = Batch::full(1).unwrap();
        let w = vec![1.0];
        let g = vec![4.0];
        let p = vec![-4.0];
        let res =
            line_search(&model, &w, &p, &g, Split::Train, &batch, 1.0, 1.0, false).unwrap();
        assert!(res.accepted);
        assert_eq!(res.alpha, 0.25);
        assert_eq!(res.evals, 3);
        assert_eq!(res.loss, 0.0);
    }

    #[test]
    fn all_non_finite_trials_reject_the_step() {
        let model = Exploding;
        let batch = Batch::full(1).unwrap();
        let res = line_search(
            &model,
            &[0.0],
            &[10.0],
            &[1.0],
            Split::Train,
            &batch,
            0.0,
            1.0,
            false,
        );
        assert!(matches!(res, Err(CoreError::StepRejected { .. })));
    }

    #[test]
    fn take_best_prefers_the_lowest_loss_trial() {
        // On the quartic from w=1 with a strong ascent direction p=+4 no
        // trial passes; the best trial is the smallest α (closest to w).
        let model = Quartic;
        let batch = Batch::full(1).unwrap();
        let res = line_search(
            &model,
            &[1.0],
            &[4.0],
            &[4.0],
            Split::Train,
            &batch,
            1.0,
            1.0,
            true,
        )
        .unwrap();
        assert!(!res.accepted);
        assert!((res.alpha - 2f64.powi(-10)).abs() < 1e-18);
    }

    #[test]
    fn stationarity_test_matches_the_guard() {
        let cfg = test_config();
        assert!(check_stationary(0.0, 1.0, &cfg));
        assert!(!check_stationary(2.0 * cfg.eps_g, 1.0, &cfg));
        assert!(!check_stationary(cfg.eps_g / 2.0, -2.0 * cfg.eps_h, &cfg));
        assert!(check_stationary(cfg.eps_g / 2.0, -cfg.eps_h / 2.0, &cfg));
        assert!(check_stationary(0.0, f64::INFINITY, &cfg));
    }

    #[test]
    fn gradient_descent_update_is_exact() {
        let mut state = BaselineState::new(false, 3);
        let w = vec![1.0, 2.0, 3.0];
        let g = vec![0.5, -1.0, 0.0];
        let next = baseline_step(&mut state, &w, &g, 0.2);
        assert_eq!(next, vec![1.0 - 0.1, 2.0 + 0.2, 3.0]);
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut state = BaselineState::new(false, 2);
        let w = vec![0.3, -0.7];
        let next = baseline_step(&mut state, &w, &[0.0, 0.0], 0.5);
        assert_eq!(next, w);
    }

    #[test]
    fn adam_first_step_matches_the_hand_oracle() {
        // With g = 1 everywhere: m̂ = g, v̂ = g² after bias correction, so
        // the first update is −α/(1 + ε) per coordinate.
        let mut state = BaselineState::new(true, 3);
        let w = vec![0.0, 0.0, 0.0];
        let g = vec![1.0, 1.0, 1.0];
        let alpha = 0.1;
        let next = baseline_step(&mut state, &w, &g, alpha);
        let want = -alpha / (1.0 + ADAM_EPS);
        for x in &next {
            assert!((x - want).abs() < 1e-15, "got {x}, want {want}");
        }
        match &state {
            BaselineState::Adam { t, .. } => assert_eq!(*t, 1),
            _ => panic!("adam state expected"),
        }
    }

    #[test]
    fn adam_second_step_follows_the_moment_recursion() {
        let mut state = BaselineState::new(true, 1);
        let mut w = vec![0.0];
        w = baseline_step(&mut state, &w, &[1.0], 0.1);
        let next = baseline_step(&mut state, &w, &[2.0], 0.1);
        // Hand recursion: m₂ = 0.9·0.1 + 0.1·2 = 0.29; v₂ = 0.999·0.001 +
        // 0.001·4 = 0.004999; bias: m̂ = 0.29/(1−0.81), v̂ = 0.004999/(1−0.999²).
        let m_hat07 = 0.29 / (1.0 - 0.9f64.powi(2));
        let v_hat = 0.004999 / (1.0 - 0.999f64.powi(2));
        let want = w[0] - 0.1 * m_hat07 / (v_hat.sqrt() + ADAM_EPS);
        assert!((next[0] - want).abs() < 1e-12, "got {}, want {want}", next[0]);
    }
}
