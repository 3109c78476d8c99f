//! Experiment harness over `snk-core`: named problem builders, seed
//! ensembles, spectrum probes, batch-size sensitivity grids, and Monte Carlo
//! verification of the one-step error bounds.

pub mod bounds;
pub mod ensemble;
pub mod experiment;
pub mod sensitivity;
pub mod spectrum;

pub use bounds::{verify_bound, BoundCheckReport, BoundKind, BoundSpec};
pub use ensemble::{run_ensemble, summarize_dir, EnsembleSummary, RunStatus};
pub use experiment::{ExperimentSpec, ProblemSpec};
pub use sensitivity::{batch_sensitivity, SensitivitySpec};
pub use spectrum::{spectrum_probe, SpectrumRow};
