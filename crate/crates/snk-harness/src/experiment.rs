//! Experiment specifications: the JSON-facing description of a problem
//! instance, the optimizer configurations to race on it, and the seeds to
//! race them over. Problem construction is seeded independently of the run
//! seeds so every run in an ensemble sees the identical problem instance.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use snk_core::model::{
    Activation, Dataset, DifferentiableModel, FeedforwardAutoencoder, QuadraticParams,
    QuadraticProblem, SaddleKind,
};
use snk_core::numerics::SeededRng;
use snk_core::optimizer::OptimizerConfig;
use snk_core::{CoreError, CoreResult};

fn default_lambda_max() -> f64 {
    1.0
}
fn default_decay() -> f64 {
    0.9
}
fn default_true() -> bool {
    true
}
fn default_activation() -> Activation {
    Activation::Tanh
}
fn default_samples() -> usize {
    512
}
fn default_test_samples() -> usize {
    128
}
fn default_components() -> usize {
    4
}
fn default_scale_floor() -> f64 {
    1e-2
}

/// Which model a run optimizes. Every variant is constructible from flat
/// JSON; randomized pieces (basis, per-sample scatter, synthetic data) are
/// drawn from `problem_seed`, never from the run seeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// Stochastic quadratic with a pinned mean spectrum. The spectrum is
    /// either given explicitly or generated geometrically as
    /// `lambda_max · decay^i`.
    Quadratic {
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        spectrum: Option<Vec<f64>>,
        #[serde(default = "default_lambda_max")]
        lambda_max: f64,
        #[serde(default = "default_decay")]
        decay: f64,
        #[serde(default = "default_true")]
        random_basis: bool,
        #[serde(default)]
        sigma_h: f64,
        n_train: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_test: Option<usize>,
        gamma: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        w_star: Option<Vec<f64>>,
        #[serde(default)]
        problem_seed: u64,
    },
    /// Two-dimensional saddle fixture.
    Saddle { which: SaddleKind, gamma: f64 },
    /// Fully-connected autoencoder. Data comes from CSV paths when given,
    /// otherwise from a seeded synthetic Gaussian mixture with
    /// geometrically decaying per-coordinate scales.
    Autoencoder {
        widths: Vec<usize>,
        #[serde(default = "default_activation")]
        activation: Activation,
        gamma: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        train_csv: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        test_csv: Option<PathBuf>,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default = "default_test_samples")]
        test_samples: usize,
        #[serde(default = "default_components")]
        components: usize,
        #[serde(default = "default_scale_floor")]
        scale_floor: f64,
        #[serde(default)]
        problem_seed: u64,
    },
}

impl ProblemSpec {
    /// Short tag for file names and log lines.
    pub fn kind_name(&self) -> &'static str {
        match self {
            ProblemSpec::Quadratic { .. } => "quadratic",
            ProblemSpec::Saddle { .. } => "saddle",
            ProblemSpec::Autoencoder { .. } => "autoencoder",
        }
    }

    /// Resolve the quadratic parameters (geometric spectrum fallback and
    /// test-split default) without building the problem.
    fn quadratic_params(&self) -> CoreResult<QuadraticParams> {
        let ProblemSpec::Quadratic {
            dim,
            spectrum,
            lambda_max,
            decay,
            random_basis,
            sigma_h,
            n_train,
            n_test,
            gamma,
            w_star,
            ..
        } = self
        else {
            return Err(CoreError::InvalidArgument(format!(
                "expected a quadratic problem, got `{}`",
                self.kind_name()
            )));
        };
        let spectrum = match spectrum {
            Some(s) => s.clone(),
            None => {
                if !(decay.is_finite() && *decay > 0.0) || !lambda_max.is_finite() {
                    return Err(CoreError::InvalidArgument(format!(
                        "geometric spectrum needs finite lambda_max and decay > 0, \
                         got {lambda_max} and {decay}"
                    )));
                }
                (0..*dim).map(|i| lambda_max * decay.powi(i as i32)).collect()
            }
        };
        Ok(QuadraticParams {
            dim: *dim,
            spectrum,
            random_basis: *random_basis,
            sigma_h: *sigma_h,
            n_train: *n_train,
            n_test: n_test.unwrap_or_else(|| (n_train / 3).max(1)),
            gamma: *gamma,
            w_star: w_star.clone(),
        })
    }

    /// Build the concrete quadratic problem; errors for other kinds. Bound
    /// verification needs this concrete type for its mean-Hessian oracle.
    pub fn build_quadratic(&self) -> CoreResult<QuadraticProblem> {
        let params = self.quadratic_params()?;
        let seed = match self {
            ProblemSpec::Quadratic { problem_seed, .. } => *problem_seed,
            _ => unreachable!("quadratic_params already rejected other kinds"),
        };
        QuadraticProblem::new(&params, &mut SeededRng::new(seed))
    }

    /// Build the model behind this spec.
    pub fn build(&self) -> CoreResult<Box<dyn DifferentiableModel>> {
        match self {
            ProblemSpec::Quadratic { .. } => Ok(Box::new(self.build_quadratic()?)),
            ProblemSpec::Saddle { which, gamma } => {
                snk_core::model::make_saddle_problem(*which, *gamma)
            }
            ProblemSpec::Autoencoder {
                widths,
                activation,
                gamma,
                train_csv,
                test_csv,
                samples,
                test_samples,
                components,
                scale_floor,
                problem_seed,
            } => {
                let input_dim = *widths.first().ok_or_else(|| {
                    CoreError::InvalidArgument("autoencoder widths must be non-empty".into())
                })?;
                let mut rng = SeededRng::new(*problem_seed);
                let scales = Dataset::geometric_scales(input_dim, *scale_floor);
                let train = match train_csv {
                    Some(path) => Dataset::from_csv(path)?,
                    None => Dataset::synthetic_mixture(
                        *samples,
                        input_dim,
                        *components,
                        &scales,
                        &mut rng,
                    )?,
                };
                let test = match test_csv {
                    Some(path) => Dataset::from_csv(path)?,
                    None => Dataset::synthetic_mixture(
                        *test_samples,
                        input_dim,
                        *components,
                        &scales,
                        &mut rng,
                    )?,
                };
                Ok(Box::new(FeedforwardAutoencoder::new(
                    widths.clone(),
                    *activation,
                    *gamma,
                    train,
                    test,
                )?))
            }
        }
    }
}

/// One ensemble: a problem, the optimizer configurations to run on it, and
/// the seeds to repeat each configuration over.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub problem: ProblemSpec,
    pub configs: Vec<OptimizerConfig>,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> CoreResult<()> {
        if self.configs.is_empty() {
            return Err(CoreError::InvalidConfig(
                "experiment needs at least one optimizer config".into(),
            ));
        }
        if self.seeds.is_empty() {
            return Err(CoreError::InvalidConfig(
                "experiment needs at least one seed".into(),
            ));
        }
        for (i, cfg) in self.configs.iter().enumerate() {
            cfg.validate().map_err(|e| {
                CoreError::InvalidConfig(format!("config {i} ({}): {e}", cfg.method.as_str()))
            })?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> CoreResult<Self> {
        let text = fs::read_to_string(path)?;
        let spec: Self = serde_json::from_str(&text).map_err(CoreError::Json)?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Canonical per-run file stem: config index, method name, seed.
pub fn run_stem(config_index: usize, method: &str, seed: u64) -> String {
    format!("c{config_index:02}_{method}_s{seed}")
}

/// A single run: one problem, one optimizer configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub problem: ProblemSpec,
    pub config: OptimizerConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl RunSpec {
    pub fn load(path: &Path) -> CoreResult<Self> {
        let text = fs::read_to_string(path)?;
        let spec: Self = serde_json::from_str(&text).map_err(CoreError::Json)?;
        spec.config.validate()?;
        Ok(spec)
    }
}
