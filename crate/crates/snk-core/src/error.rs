//! One error enum for the whole core crate; variants carry enough context to
//! diagnose a failed run from a log line.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not symmetric: max |A_ij - A_ji| = {max_asymmetry:.3e} exceeds tolerance {tol:.3e}")]
    NotSymmetric { max_asymmetry: f64, tol: f64 },

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:.3e})")]
    EigNoConvergence { sweeps: usize, off_norm: f64 },

    #[error("degenerate sketch: column {column} has norm {norm:.3e} (< {tol:.3e}) during QR")]
    DegenerateSketch {
        column: usize,
        norm: f64,
        tol: f64,
    },

    #[error("regularized spectrum is numerically singular: |lambda + gamma| = {margin:.3e} at retained index {index}")]
    SingularShift { index: usize, margin: f64 },

    #[error("non-finite {what} encountered (|w| = {w_norm:.3e})")]
    NonFinite { what: &'static str, w_norm: f64 },

    #[error("batch index {index} out of range for dataset of {len} samples")]
    BatchIndexOutOfRange { index: usize, len: usize },

    #[error("batch indices must be distinct in {context}")]
    DuplicateBatchIndex { context: &'static str },

    #[error("empty batch in {0}")]
    EmptyBatch(&'static str),

    #[error("step rejected: alpha = {alpha:.3e}, |p| = {step_norm:.3e}: {reason}")]
    StepRejected {
        alpha: f64,
        step_norm: f64,
        reason: String,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("sweep accounting mismatch at iteration {k}: predicted {predicted} sweeps, metered {metered}")]
    SweepAccounting { k: usize, predicted: f64, metered: f64 },

    #[error("malformed {what} at line {line}: {detail}")]
    Parse {
        what: &'static str,
        line: usize,
        detail: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type CoreResult<T> = Result<T, CoreError>;
