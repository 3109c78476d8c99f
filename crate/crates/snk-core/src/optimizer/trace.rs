//! Iteration records, run traces, the bit-exact trace CSV format, and the
//! sweep-accounting audit that compares metered costs against the closed
//! cost formulas.

use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::krylov::KrylovTermination;
use crate::numerics::{format_f64, parse_f64};
use crate::optimizer::config::OptimizerConfig;
use crate::{CoreError, CoreResult};

/// Second-order telemetry for one outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum InnerDetail {
    /// First-order step (or the initial record): no inner solve.
    None,
    /// Low-rank factorization telemetry. `min_eig` is the smallest retained
    /// eigenvalue of the raw (unshifted, unflipped) subsampled Hessian;
    /// `sketch_applies` counts operator applications spent on the sketch.
    LowRank {
        rank: usize,
        min_eig: f64,
        discarded: Vec<f64>,
        sketch_applies: usize,
    },
    /// Krylov solve telemetry. `min_rayleigh` is over the regularized
    /// operator (shift included).
    Krylov {
        iterations: usize,
        operator_applies: usize,
        termination: KrylovTermination,
        residual_norm: f64,
        min_rayleigh: f64,
    },
}

impl InnerDetail {
    pub fn inner_iters(&self) -> usize {
        match self {
            InnerDetail::None => 0,
            InnerDetail::LowRank { rank, .. } => *rank,
            InnerDetail::Krylov { iterations, .. } => *iterations,
        }
    }

    /// Raw-curvature estimate for the stationarity guard and the trace:
    /// the subsampled Hessian's smallest observed eigenvalue (low-rank) or
    /// smallest observed Rayleigh quotient minus the shift (Krylov).
    pub fn curvature_estimate(&self, gamma: f64) -> f64 {
        match self {
            InnerDetail::None => f64::INFINITY,
            InnerDetail::LowRank { min_eig, .. } => *min_eig,
            InnerDetail::Krylov { min_rayleigh, .. } => min_rayleigh - gamma,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    /// Budget-metered sweeps after this iteration completed.
    pub cumulative_sweeps: f64,
    /// Regularized objective over the full training split at the iterate.
    pub train_loss: f64,
    /// Raw loss over the full test split at the iterate.
    pub test_loss: f64,
    /// Norm of the regularized batch gradient the step was computed from.
    pub grad_norm: f64,
    pub alpha: f64,
    pub inner_detail: InnerDetail,
    /// Pinned to zero: wall time is nondeterministic, traces must not be.
    pub wall_time_s: f64,
    /// Gradient batch size this iteration.
    pub nx: usize,
    /// Hessian subsample size this iteration (0 when unused).
    pub ns: usize,
    /// Loss-only evaluations this iteration (reference value plus trials;
    /// 0 under the fixed-alpha policy).
    pub ls_evals: usize,
    /// The line search failed sufficient decrease and the step was taken
    /// anyway.
    pub taken_anyways: bool,
}

impl IterationRecord {
    pub fn termination_label(&self) -> &'static str {
        if self.k == 0 {
            return "init";
        }
        match &self.inner_detail {
            InnerDetail::None => "first-order",
            InnerDetail::LowRank { .. } => "lowrank",
            InnerDetail::Krylov { termination, .. } => termination.as_str(),
        }
    }

    /// Value for the `min_rayleigh_or_eig` trace column (raw-curvature
    /// estimate; `inf` when the iteration probed no curvature).
    pub fn curvature_column(&self, gamma: f64) -> f64 {
        self.inner_detail.curvature_estimate(gamma)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TerminationStatus {
    /// The sweep budget was reached.
    Budget,
    /// The stationarity guard fired.
    Stationary,
    /// A step produced a non-finite loss (or every line-search trial did).
    StepRejected {
        alpha: f64,
        step_norm: f64,
        reason: String,
    },
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub config: OptimizerConfig,
    pub records: Vec<IterationRecord>,
    pub final_w: Vec<f64>,
    /// Minimum train_loss over all records.
    pub best_train: f64,
    /// Minimum test_loss over all records.
    pub best_test: f64,
    pub status: TerminationStatus,
    /// Final budget-metered sweep total.
    pub budget_sweeps: f64,
    /// Reporting cost (full-split evaluations), metered separately and
    /// excluded from the budget.
    pub eval_sweeps: f64,
    /// Every iterate (including w₀) when the config asked to keep them.
    pub iterates: Option<Vec<Vec<f64>>>,
}

impl RunTrace {
    /// Iterate at record index `i`, available only when the run kept them.
    pub fn iterate(&self, i: usize) -> CoreResult<&[f64]> {
        let iterates = self.iterates.as_ref().ok_or_else(|| {
            CoreError::InvalidArgument(
                "this trace did not keep iterates; set keep_iterates in the config".into(),
            )
        })?;
        iterates
            .get(i)
            .map(|w| w.as_slice())
            .ok_or_else(|| CoreError::InvalidArgument(format!(
                "iterate index {i} out of range ({} kept)",
                iterates.len()
            )))
    }
}

pub const TRACE_HEADER: &str =
    "k,sweeps,train_loss,test_loss,grad_norm,alpha,inner_iters,termination,min_rayleigh_or_eig,wall_time_s";

/// Render the trace in the pinned CSV layout (round-trippable floats).
pub fn trace_to_csv(trace: &RunTrace) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for rec in &trace.records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            rec.k,
            format_f64(rec.cumulative_sweeps),
            format_f64(rec.train_loss),
            format_f64(rec.test_loss),
            format_f64(rec.grad_norm),
            format_f64(rec.alpha),
            rec.inner_iters(),
            rec.termination_label(),
            format_f64(rec.curvature_column(trace.config.gamma)),
            format_f64(rec.wall_time_s),
        ));
    }
    out
}

impl IterationRecord {
    fn inner_iters(&self) -> usize {
        self.inner_detail.inner_iters()
    }
}

pub fn write_trace_csv(trace: &RunTrace, path: &Path) -> CoreResult<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(trace_to_csv(trace).as_bytes())?;
    Ok(())
}

/// One parsed trace row (the CSV view of an IterationRecord).
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub sweeps: f64,
    pub train_loss: f64,
    pub test_loss: f64,
    pub grad_norm: f64,
    pub alpha: f64,
    pub inner_iters: usize,
    pub termination: String,
    pub min_rayleigh_or_eig: f64,
    pub wall_time_s: f64,
}

pub fn parse_trace_csv(text: &str) -> CoreResult<Vec<TraceRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == TRACE_HEADER => {}
        Some((_, header)) => {
            return Err(CoreError::Parse {
                what: "trace header",
                line: 1,
                detail: format!("expected `{TRACE_HEADER}`, got `{header}`"),
            })
        }
        None => {
            return Err(CoreError::Parse {
                what: "trace header",
                line: 1,
                detail: "empty file".into(),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let lineno = i + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(CoreError::Parse {
                what: "trace row",
                line: lineno,
                detail: format!("expected 10 fields, got {}", fields.len()),
            });
        }
        let parse_usize = |s: &str, what: &'static str| -> CoreResult<usize> {
            s.parse::<usize>().map_err(|e| CoreError::Parse {
                what,
                line: lineno,
                detail: e.to_string(),
            })
        };
        rows.push(TraceRow {
            k: parse_usize(fields[0], "trace k")?,
            sweeps: parse_f64(fields[1], "trace sweeps", lineno)?,
            train_loss: parse_f64(fields[2], "trace train_loss", lineno)?,
            test_loss: parse_f64(fields[3], "trace test_loss", lineno)?,
            grad_norm: parse_f64(fields[4], "trace grad_norm", lineno)?,
            alpha: parse_f64(fields[5], "trace alpha", lineno)?,
            inner_iters: parse_usize(fields[6], "trace inner_iters")?,
            termination: fields[7].to_string(),
            min_rayleigh_or_eig: parse_f64(fields[8], "trace min_rayleigh_or_eig", lineno)?,
            wall_time_s: parse_f64(fields[9], "trace wall_time_s", lineno)?,
        });
    }
    Ok(rows)
}

pub fn read_trace_csv(path: &Path) -> CoreResult<Vec<TraceRow>> {
    parse_trace_csv(&std::fs::read_to_string(path)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetRow {
    pub k: usize,
    pub predicted: f64,
    pub metered: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetReport {
    pub rows: Vec<BudgetRow>,
    pub total_predicted: f64,
    pub total_metered: f64,
}

/// Per-iteration sweep cost from the closed formulas:
///   gradient batch        N_X
///   low-rank sketch       2·(sketch applies)·N_S   (healthy: 4(r+p)·N_S)
///   Krylov inner solve    2·(operator applies)·N_S
///   loss-only evaluations N_X/2 each
fn predicted_sweeps(rec: &IterationRecord) -> f64 {
    let base = rec.nx as f64;
    let second_order = match &rec.inner_detail {
        InnerDetail::None => 0.0,
        InnerDetail::LowRank { sketch_applies, .. } => {
            2.0 * *sketch_applies as f64 * rec.ns as f64
        }
        InnerDetail::Krylov {
            operator_applies, ..
        } => 2.0 * *operator_applies as f64 * rec.ns as f64,
    };
    base + second_order + 0.5 * rec.ls_evals as f64 * rec.nx as f64
}

/// Audit the trace's metered sweep deltas against the cost formulas. The
/// agreement must be exact — every term is an integer or half-integer,
/// both exactly representable — and any mismatch is an accounting error.
pub fn sweep_budget_report(trace: &RunTrace) -> CoreResult<BudgetReport> {
    let mut rows = Vec::new();
    let mut total_predicted = 0.0;
    let mut total_metered = 0.0;
    for pair in trace.records.windows(2) {
        let (prev, rec) = (&pair[0], &pair[1]);
        let metered = rec.cumulative_sweeps - prev.cumulative_sweeps;
        let predicted = predicted_sweeps(rec);
        if predicted != metered {
            return Err(CoreError::SweepAccounting {
                k: rec.k,
                predicted,
                metered,
            });
        }
        total_predicted += predicted;
        total_metered += metered;
        rows.push(BudgetRow {
            k: rec.k,
            predicted,
            metered,
        });
    }
    Ok(BudgetReport {
        rows,
        total_predicted,
        total_metered,
    })
}
