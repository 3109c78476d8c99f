//! Run configuration: method selection, step-size policy, batching policy,
//! tolerances, and the sweep budget, with validation against both internal
//! consistency rules and the target model.

use serde::{Deserialize, Serialize};

use crate::krylov::ForcingSchedule;
use crate::model::{DifferentiableModel, Split};
use crate::{CoreError, CoreResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Low-rank saddle-free Newton: randomized eigendecomposition with the
    /// absolute-value spectrum flip.
    Lrsfn,
    /// Plain low-rank Newton: same factorization, no flip.
    LrNewton,
    /// Inexact Newton with conjugate-gradient inner solves.
    Incg,
    /// Inexact Newton with MINRES inner solves.
    Inminres,
    /// Inexact Newton with GMRES inner solves.
    Ingmres,
    Gd,
    Sgd,
    Adam,
}

impl Method {
    pub fn is_low_rank(&self) -> bool {
        matches!(self, Method::Lrsfn | Method::LrNewton)
    }

    pub fn is_krylov(&self) -> bool {
        matches!(self, Method::Incg | Method::Inminres | Method::Ingmres)
    }

    pub fn is_newton(&self) -> bool {
        self.is_low_rank() || self.is_krylov()
    }

    pub fn is_first_order(&self) -> bool {
        matches!(self, Method::Gd | Method::Sgd | Method::Adam)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Lrsfn => "lrsfn",
            Method::LrNewton => "lr-newton",
            Method::Incg => "incg",
            Method::Inminres => "inminres",
            Method::Ingmres => "ingmres",
            Method::Gd => "gd",
            Method::Sgd => "sgd",
            Method::Adam => "adam",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AlphaPolicy {
    /// Constant step size every iteration.
    Fixed { alpha: f64 },
    /// Backtracking line search from `alpha0` (nonmonotone: the last trial
    /// is taken when no trial passes the sufficient-decrease test).
    LineSearch {
        #[serde(default = "default_alpha0")]
        alpha0: f64,
    },
}

impl Default for AlphaPolicy {
    fn default() -> Self {
        AlphaPolicy::LineSearch { alpha0: 1.0 }
    }
}

fn default_alpha0() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
#[derive(Default)]
pub enum Batching {
    /// The gradient batch X_k is one fixed subset (a seed-shuffled prefix of
    /// the training set) reused every iteration.
    #[default]
    SemiStochastic,
    /// A fresh uniform subsample of size `fraction·N_X` each iteration.
    FullyStochastic { fraction: f64 },
}


#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ForcingMode {
    /// `η_k = min(eta_max, ‖g_k‖)`.
    #[default]
    GradientNorm,
    /// `η_k = eta_const`.
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub method: Method,
    /// Tikhonov regularization weight; must match the model's.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Retained rank for the low-rank methods.
    #[serde(default = "default_rank")]
    pub rank: usize,
    /// Oversampling columns for the randomized sketch.
    #[serde(default = "default_oversample")]
    pub oversample: usize,
    #[serde(default)]
    pub forcing: ForcingMode,
    #[serde(default = "default_eta_max")]
    pub eta_max: f64,
    #[serde(default = "default_eta_const")]
    pub eta_const: f64,
    /// Inner-iteration cap for the Krylov methods; `None` means `min(d, 100)`.
    #[serde(default)]
    pub max_inner: Option<usize>,
    #[serde(default)]
    pub alpha_policy: AlphaPolicy,
    /// Gradient-norm stationarity tolerance.
    #[serde(default = "default_eps_g")]
    pub eps_g: f64,
    /// Negative-curvature stationarity tolerance.
    #[serde(default = "default_eps_h")]
    pub eps_h: f64,
    /// Gradient batch size.
    pub n_x: usize,
    /// Hessian subsample size (drawn from within X_k).
    pub n_s: usize,
    #[serde(default)]
    pub batching: Batching,
    /// Sweep budget; the run stops once the metered total reaches it.
    pub max_sweeps: f64,
    pub seed: u64,
    /// Plain gradient steps before the configured method takes over;
    /// `None` resolves to the per-method default (2 for the MINRES/GMRES
    /// Newton methods, 0 otherwise).
    #[serde(default)]
    pub warmup_gd_steps: Option<usize>,
    /// Standard deviation of the Gaussian parameter initialization.
    #[serde(default = "default_init_scale")]
    pub init_scale: f64,
    /// On line-search failure take the best trial instead of the last.
    #[serde(default)]
    pub ls_take_best: bool,
    /// Store every iterate in the trace (needed for spectrum probes).
    #[serde(default)]
    pub keep_iterates: bool,
}

fn default_gamma() -> f64 {
    0.1
}

fn default_rank() -> usize {
    20
}

fn default_oversample() -> usize {
    5
}

fn default_eta_max() -> f64 {
    ForcingSchedule::DEFAULT_ETA_MAX
}

fn default_eta_const() -> f64 {
    0.1
}

fn default_eps_g() -> f64 {
    1e-8
}

fn default_eps_h() -> f64 {
    1e-8
}

fn default_init_scale() -> f64 {
    1.0
}

impl OptimizerConfig {
    /// Model-independent consistency checks.
    pub fn validate(&self) -> CoreResult<()> {
        let bad = |msg: String| Err(CoreError::InvalidConfig(msg));
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return bad(format!("gamma must be finite and > 0, got {}", self.gamma));
        }
        if !(self.eps_g.is_finite() && self.eps_g > 0.0) {
            return bad(format!("eps_g must be finite and > 0, got {}", self.eps_g));
        }
        if !(self.eps_h.is_finite() && self.eps_h > 0.0) {
            return bad(format!("eps_h must be finite and > 0, got {}", self.eps_h));
        }
        if self.method.is_newton() && self.gamma <= self.eps_h {
            return bad(format!(
                "Newton methods need gamma > eps_h (got gamma={}, eps_h={})",
                self.gamma, self.eps_h
            ));
        }
        if self.n_x == 0 || self.n_s == 0 {
            return bad("n_x and n_s must be at least 1".into());
        }
        if self.n_s > self.n_x {
            return bad(format!(
                "n_s ({}) must not exceed n_x ({})",
                self.n_s, self.n_x
            ));
        }
        if !(self.max_sweeps.is_finite() && self.max_sweeps >= 0.0) {
            return bad(format!(
                "max_sweeps must be finite and >= 0, got {}",
                self.max_sweeps
            ));
        }
        if self.method.is_low_rank() {
            if self.rank == 0 {
                return bad("low-rank methods need rank >= 1".into());
            }
            if self.oversample < 2 {
                return bad(format!(
                    "low-rank methods need oversample >= 2, got {}",
                    self.oversample
                ));
            }
        }
        if self.method.is_krylov() {
            if !(self.eta_max > 0.0 && self.eta_max < 1.0) {
                return bad(format!(
                    "eta_max must lie in (0, 1), got {}",
                    self.eta_max
                ));
            }
            if self.forcing == ForcingMode::Constant
                && !(self.eta_const > 0.0 && self.eta_const < 1.0)
            {
                return bad(format!(
                    "eta_const must lie in (0, 1), got {}",
                    self.eta_const
                ));
            }
        }
        match self.alpha_policy {
            AlphaPolicy::Fixed { alpha } => {
                if !(alpha.is_finite() && alpha > 0.0) {
                    return bad(format!("fixed alpha must be finite and > 0, got {alpha}"));
                }
            }
            AlphaPolicy::LineSearch { alpha0 } => {
                if !(alpha0.is_finite() && alpha0 > 0.0) {
                    return bad(format!("alpha0 must be finite and > 0, got {alpha0}"));
                }
                if self.method == Method::Adam {
                    return bad("adam supports only the fixed-alpha policy".into());
                }
            }
        }
        if !(self.init_scale.is_finite() && self.init_scale >= 0.0) {
            return bad(format!(
                "init_scale must be finite and >= 0, got {}",
                self.init_scale
            ));
        }
        if let Batching::FullyStochastic { fraction } = self.batching {
            if !(fraction > 0.0 && fraction <= 1.0) {
                return bad(format!("batching fraction must lie in (0, 1], got {fraction}"));
            }
        }
        Ok(())
    }

    /// Checks that need the model: dimension, sample counts, and the
    /// regularization weight agreeing exactly with the model's.
    pub fn validate_for<M: DifferentiableModel + ?Sized>(&self, model: &M) -> CoreResult<()> {
        self.validate()?;
        let bad = |msg: String| Err(CoreError::InvalidConfig(msg));
        if model.gamma() != self.gamma {
            return bad(format!(
                "config gamma {} does not match model gamma {}",
                self.gamma,
                model.gamma()
            ));
        }
        let n_train = model.num_samples(Split::Train);
        if self.n_x > n_train {
            return bad(format!(
                "n_x ({}) exceeds the training set size ({n_train})",
                self.n_x
            ));
        }
        if model.num_samples(Split::Test) == 0 {
            return bad("the model has no test samples to report against".into());
        }
        if self.method.is_low_rank() && self.rank > model.dim() {
            return bad(format!(
                "rank ({}) exceeds the parameter dimension ({})",
                self.rank,
                model.dim()
            ));
        }
        Ok(())
    }

    pub fn forcing_schedule(&self) -> ForcingSchedule {
        match self.forcing {
            ForcingMode::GradientNorm => ForcingSchedule::GradientNorm {
                eta_max: self.eta_max,
            },
            ForcingMode::Constant => ForcingSchedule::Constant {
                eta_const: self.eta_const,
            },
        }
    }

    /// Warm-up gradient steps, defaulting per method.
    pub fn warmup(&self) -> usize {
        self.warmup_gd_steps.unwrap_or(match self.method {
            Method::Ingmres | Method::Inminres => 2,
            _ => 0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_config(method: Method) -> OptimizerConfig {
        OptimizerConfig {
            method,
            gamma: 0.1,
            rank: 5,
            oversample: 3,
            forcing: ForcingMode::GradientNorm,
            eta_max: 0.5,
            eta_const: 0.1,
            max_inner: None,
            alpha_policy: AlphaPolicy::Fixed { alpha: 0.1 },
            eps_g: 1e-8,
            eps_h: 1e-8,
            n_x: 20,
            n_s: 5,
            batching: Batching::SemiStochastic,
            max_sweeps: 1000.0,
            seed: 7,
            warmup_gd_steps: None,
            init_scale: 1.0,
            ls_take_best: false,
            keep_iterates: false,
        }
    }

    #[test]
    fn method_names_round_trip_through_serde() {
        for (method, name) in [
            (Method::Lrsfn, "lrsfn"),
            (Method::LrNewton, "lr-newton"),
            (Method::Incg, "incg"),
            (Method::Inminres, "inminres"),
            (Method::Ingmres, "ingmres"),
            (Method::Gd, "gd"),
            (Method::Sgd, "sgd"),
            (Method::Adam, "adam"),
        ] {
            assert_eq!(serde_json::to_string(&method).unwrap(), format!("\"{name}\""));
            assert_eq!(method.as_str(), name);
            let back: Method = serde_json::from_str(&format!("\"{name}\"")).unwrap();
            assert_eq!(back, method);
        }
    }

    #[test]
    fn config_round_trips_through_json() {
        let mut cfg = base_config(Method::Lrsfn);
        cfg.batching = Batching::FullyStochastic { fraction: 0.25 };
        cfg.alpha_policy = AlphaPolicy::LineSearch { alpha0: 1.0 };
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: OptimizerConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn minimal_json_uses_documented_defaults() {
        let cfg: OptimizerConfig = serde_json::from_str(
            r#"{"method":"incg","n_x":10,"n_s":5,"max_sweeps":100.0,"seed":1}"#,
        )
        .unwrap();
        assert_eq!(cfg.gamma, 0.1);
        assert_eq!(cfg.eta_max, 0.5);
        assert_eq!(cfg.alpha_policy, AlphaPolicy::LineSearch { alpha0: 1.0 });
        assert_eq!(cfg.batching, Batching::SemiStochastic);
        assert_eq!(cfg.warmup(), 0);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err: Result<OptimizerConfig, _> = serde_json::from_str(
            r#"{"method":"gd","n_x":10,"n_s":5,"max_sweeps":100.0,"seed":1,"bogus":true}"#,
        );
        assert!(err.is_err());
    }

    #[test]
    fn warmup_defaults_follow_the_method() {
        assert_eq!(base_config(Method::Ingmres).warmup(), 2);
        assert_eq!(base_config(Method::Inminres).warmup(), 2);
        assert_eq!(base_config(Method::Incg).warmup(), 0);
        assert_eq!(base_config(Method::Lrsfn).warmup(), 0);
        let mut cfg = base_config(Method::Ingmres);
        cfg.warmup_gd_steps = Some(5);
        assert_eq!(cfg.warmup(), 5);
    }

    #[test]
    fn validation_rejects_inconsistent_configs() {
        let mut cfg = base_config(Method::Lrsfn);
        cfg.n_s = 50;
        assert!(cfg.validate().is_err(), "n_s > n_x must fail");

        let mut cfg = base_config(Method::Incg);
        cfg.gamma = 1e-9;
        cfg.eps_h = 1e-8;
        assert!(cfg.validate().is_err(), "Newton needs gamma > eps_h");

        let mut cfg = base_config(Method::Gd);
        cfg.gamma = 1e-9;
        cfg.eps_h = 1e-8;
        assert!(cfg.validate().is_ok(), "first-order methods skip the gamma guard");

        let mut cfg = base_config(Method::Adam);
        cfg.alpha_policy = AlphaPolicy::LineSearch { alpha0: 1.0 };
        assert!(cfg.validate().is_err(), "adam is fixed-alpha only");

        let mut cfg = base_config(Method::Lrsfn);
        cfg.oversample = 1;
        assert!(cfg.validate().is_err(), "oversample >= 2 required");

        let mut cfg = base_config(Method::Ingmres);
        cfg.eta_max = 1.5;
        assert!(cfg.validate().is_err(), "eta_max must stay below 1");

        let mut cfg = base_config(Method::Gd);
        cfg.batching = Batching::FullyStochastic { fraction: 0.0 };
        assert!(cfg.validate().is_err(), "fraction must be positive");

        let mut cfg = base_config(Method::Gd);
        cfg.max_sweeps = f64::INFINITY;
        assert!(cfg.validate().is_err(), "budget must be finite");
    }
}
