//! Ensemble execution and summary statistics. Every (config, seed) pair
//! becomes one optimization run writing two files — a trace CSV and a status
//! JSON — and the summary is always recomputed from those files by the same
//! reader the `summarize` subcommand uses, so in-process and after-the-fact
//! summaries agree byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use snk_core::numerics::{format_f64, parse_f64};
use snk_core::optimizer::{self, read_trace_csv, write_trace_csv, TerminationStatus};
use snk_core::{CoreError, CoreResult};

use crate::experiment::{run_stem, ExperimentSpec};

/// Where one run ended up, as persisted in its status JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum RunOutcome {
    /// The run loop terminated on its own terms (budget, stationarity, or a
    /// rejected step with the partial trace retained).
    Finished {
        status: TerminationStatus,
        best_train: f64,
        best_test: f64,
        iterations: usize,
        budget_sweeps: f64,
        eval_sweeps: f64,
    },
    /// The run never produced a trace (invalid config for the model,
    /// non-finite initial loss, I/O failure, ...).
    Error { message: String },
}

/// Status sidecar written next to each trace file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunStatus {
    pub config_index: usize,
    pub method: String,
    pub seed: u64,
    #[serde(flatten)]
    pub outcome: RunOutcome,
}

impl RunStatus {
    /// A run counts toward summary statistics only when its loop ran to a
    /// planned termination; rejected steps and hard errors are reported but
    /// excluded from the loss statistics.
    pub fn is_complete(&self) -> bool {
        matches!(
            self.outcome,
            RunOutcome::Finished {
                status: TerminationStatus::Budget | TerminationStatus::Stationary,
                ..
            }
        )
    }
}

/// Execute one (config, seed) member: build the problem, run, write
/// `trace_<stem>.csv` and `status_<stem>.json`. Optimizer-level failures are
/// captured in the status file; only file-system failures propagate.
pub fn run_member(
    spec: &ExperimentSpec,
    config_index: usize,
    seed: u64,
    out_dir: &Path,
) -> CoreResult<RunStatus> {
    let cfg = spec.configs.get(config_index).ok_or_else(|| {
        CoreError::InvalidArgument(format!(
            "config index {config_index} out of range ({} configs)",
            spec.configs.len()
        ))
    })?;
    let method = cfg.method.as_str().to_string();
    let stem = run_stem(config_index, &method, seed);

    let outcome = (|| -> CoreResult<RunOutcome> {
        let model = spec.problem.build()?;
        let mut cfg = cfg.clone();
        cfg.seed = seed;
        let trace = optimizer::run(model.as_ref(), &cfg)?;
        write_trace_csv(&trace, &out_dir.join(format!("trace_{stem}.csv")))?;
        Ok(RunOutcome::Finished {
            status: trace.status.clone(),
            best_train: trace.best_train,
            best_test: trace.best_test,
            iterations: trace.records.len().saturating_sub(1),
            budget_sweeps: trace.budget_sweeps,
            eval_sweeps: trace.eval_sweeps,
        })
    })()
    .unwrap_or_else(|e| RunOutcome::Error {
        message: e.to_string(),
    });

    let status = RunStatus {
        config_index,
        method,
        seed,
        outcome,
    };
    let text = serde_json::to_string_pretty(&status).map_err(CoreError::Json)?;
    fs::write(out_dir.join(format!("status_{stem}.json")), text + "\n")?;
    Ok(status)
}

/// mean / std (sample, n−1) / min / median of a value set. Inputs must be in
/// a canonical (seed-sorted) order so the floating-point sums are
/// permutation-invariant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub median: f64,
}

impl Stats {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
                min: f64::NAN,
                median: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
            (ss / (n - 1) as f64).sqrt()
        };
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("loss values are finite"));
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        Self {
            mean,
            std,
            min,
            median,
        }
    }
}

/// One summary row: loss statistics for a configuration across its seeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigSummary {
    pub config_index: usize,
    pub method: String,
    pub completed: usize,
    pub incomplete: usize,
    pub best_train: Stats,
    pub best_test: Stats,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub rows: Vec<ConfigSummary>,
}

pub const SUMMARY_HEADER: &str = "config_index,method,completed,incomplete,\
train_mean,train_std,train_min,train_median,\
test_mean,test_std,test_min,test_median";

pub fn summary_to_csv(summary: &EnsembleSummary) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for row in &summary.rows {
        let tr = &row.best_train;
        let te = &row.best_test;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            row.config_index,
            row.method,
            row.completed,
            row.incomplete,
            format_f64(tr.mean),
            format_f64(tr.std),
            format_f64(tr.min),
            format_f64(tr.median),
            format_f64(te.mean),
            format_f64(te.std),
            format_f64(te.min),
            format_f64(te.median),
        ));
    }
    out
}

pub fn parse_summary_csv(text: &str) -> CoreResult<EnsembleSummary> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != SUMMARY_HEADER {
        return Err(CoreError::Parse {
            what: "summary header".into(),
            line: 1,
            detail: format!("got `{header}`"),
        });
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 12 {
            return Err(CoreError::Parse {
                what: "summary row".into(),
                line: line_no,
                detail: format!("expected 12 fields, got {}", fields.len()),
            });
        }
        let int = |s: &str, what: &'static str| -> CoreResult<usize> {
            s.parse().map_err(|_| CoreError::Parse {
                what: what.into(),
                line: line_no,
                detail: format!("got `{s}`"),
            })
        };
        rows.push(ConfigSummary {
            config_index: int(fields[0], "config_index")?,
            method: fields[1].to_string(),
            completed: int(fields[2], "completed")?,
            incomplete: int(fields[3], "incomplete")?,
            best_train: Stats {
                mean: parse_f64(fields[4], "train_mean", line_no)?,
                std: parse_f64(fields[5], "train_std", line_no)?,
                min: parse_f64(fields[6], "train_min", line_no)?,
                median: parse_f64(fields[7], "train_median", line_no)?,
            },
            best_test: Stats {
                mean: parse_f64(fields[8], "test_mean", line_no)?,
                std: parse_f64(fields[9], "test_std", line_no)?,
                min: parse_f64(fields[10], "test_min", line_no)?,
                median: parse_f64(fields[11], "test_median", line_no)?,
            },
        });
    }
    Ok(EnsembleSummary { rows })
}

/// Rebuild the summary from the files in a run directory: status JSONs give
/// completion classification, trace CSVs give the best losses. Statistics
/// run over seed-sorted completed runs only.
pub fn summarize_dir(dir: &Path) -> CoreResult<EnsembleSummary> {
    let mut statuses: Vec<(RunStatus, PathBuf)> = Vec::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if let Some(stem) = name.strip_prefix("status_").and_then(|n| n.strip_suffix(".json")) {
            let text = fs::read_to_string(entry.path())?;
            let status: RunStatus = serde_json::from_str(&text).map_err(CoreError::Json)?;
            statuses.push((status, dir.join(format!("trace_{stem}.csv"))));
        }
    }
    if statuses.is_empty() {
        return Err(CoreError::InvalidArgument(format!(
            "no status_*.json files found in {}",
            dir.display()
        )));
    }
    statuses.sort_by_key(|(s, _)| (s.config_index, s.seed));

    let mut rows: Vec<ConfigSummary> = Vec::new();
    for (status, _) in &statuses {
        if rows.last().map(|r| r.config_index) != Some(status.config_index) {
            rows.push(ConfigSummary {
                config_index: status.config_index,
                method: status.method.clone(),
                completed: 0,
                incomplete: 0,
                best_train: Stats::from_values(&[]),
                best_test: Stats::from_values(&[]),
            });
        }
        let row = rows.last_mut().expect("row just ensured");
        if status.is_complete() {
            row.completed += 1;
        } else {
            row.incomplete += 1;
        }
    }

    // Second pass: gather the seed-sorted best losses per config from the
    // trace files of completed runs.
    for row in &mut rows {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (status, trace_path) in &statuses {
            if status.config_index != row.config_index || !status.is_complete() {
                continue;
            }
            let trace = read_trace_csv(trace_path)?;
            let best_train = trace
                .iter()
                .map(|r| r.train_loss)
                .fold(f64::INFINITY, f64::min);
            let best_test = trace
                .iter()
                .map(|r| r.test_loss)
                .fold(f64::INFINITY, f64::min);
            train.push(best_train);
            test.push(best_test);
        }
        row.best_train = Stats::from_values(&train);
        row.best_test = Stats::from_values(&test);
    }
    Ok(EnsembleSummary { rows })
}

/// Run the full ensemble up to `jobs` members at a time, then summarize the
/// produced files and write `summary.csv`. Individual member failures are
/// recorded in their status files without aborting the ensemble.
pub fn run_ensemble(
    spec: &ExperimentSpec,
    out_dir: &Path,
    jobs: usize,
) -> CoreResult<EnsembleSummary> {
    spec.validate()?;
    fs::create_dir_all(out_dir)?;

    let tasks: Vec<(usize, u64)> = (0..spec.configs.len())
        .flat_map(|ci| spec.seeds.iter().map(move |&s| (ci, s)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CoreError::InvalidArgument(format!("thread pool: {e}")))?;
    let results: Vec<CoreResult<RunStatus>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(ci, seed)| run_member(spec, ci, seed, out_dir))
            .collect()
    });
    // Only file-system level failures surface here.
    for r in results {
        r?;
    }

    let summary = summarize_dir(out_dir)?;
    fs::write(out_dir.join("summary.csv"), summary_to_csv(&summary))?;
    Ok(summary)
}
