//! Hessian-batch-size sensitivity sweeps: repeat one configuration with a
//! range of `n_s` values (everything else held fixed) and dump loss-versus-
//! sweeps curves keyed by batch size.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use snk_core::numerics::{format_f64, parse_f64};
use snk_core::optimizer::{self, OptimizerConfig, RunTrace};
use snk_core::{CoreError, CoreResult};

use crate::experiment::ProblemSpec;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivitySpec {
    pub problem: ProblemSpec,
    pub config: OptimizerConfig,
    pub seeds: Vec<u64>,
    pub n_s_values: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl SensitivitySpec {
    pub fn validate(&self) -> CoreResult<()> {
        if self.seeds.is_empty() {
            return Err(CoreError::InvalidConfig(
                "sensitivity sweep needs at least one seed".into(),
            ));
        }
        if self.n_s_values.is_empty() {
            return Err(CoreError::InvalidConfig(
                "sensitivity sweep needs at least one n_s value".into(),
            ));
        }
        self.config.validate()
    }

    pub fn load(path: &std::path::Path) -> CoreResult<Self> {
        let text = std::fs::read_to_string(path)?;
        let spec: Self = serde_json::from_str(&text).map_err(CoreError::Json)?;
        spec.validate()?;
        Ok(spec)
    }
}

pub const SENSITIVITY_HEADER: &str = "n_s,seed,k,sweeps,train_loss,test_loss";

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityRow {
    pub n_s: usize,
    pub seed: u64,
    pub k: usize,
    pub sweeps: f64,
    pub train_loss: f64,
    pub test_loss: f64,
}

/// One completed member curve of the sweep.
#[derive(Debug)]
pub struct SensitivityOutcome {
    pub rows: Vec<SensitivityRow>,
    /// Human-readable records of members that failed (`n_s`, seed, error).
    pub failures: Vec<String>,
}

fn member_rows(trace: &RunTrace, n_s: usize, seed: u64) -> Vec<SensitivityRow> {
    trace
        .records
        .iter()
        .map(|r| SensitivityRow {
            n_s,
            seed,
            k: r.k,
            sweeps: r.cumulative_sweeps,
            train_loss: r.train_loss,
            test_loss: r.test_loss,
        })
        .collect()
}

/// Run the grid (one run per `n_s` per seed, everything else fixed) and
/// collect rows ordered by (n_s, seed, k). Individual run failures are
/// recorded, not fatal.
pub fn batch_sensitivity(spec: &SensitivitySpec, jobs: usize) -> CoreResult<SensitivityOutcome> {
    spec.validate()?;
    let mut grid: Vec<(usize, u64)> = Vec::new();
    for &n_s in &spec.n_s_values {
        for &seed in &spec.seeds {
            grid.push((n_s, seed));
        }
    }
    grid.sort_unstable();
    grid.dedup();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CoreError::InvalidArgument(format!("thread pool: {e}")))?;
    let members: Vec<((usize, u64), CoreResult<RunTrace>)> = pool.install(|| {
        grid.par_iter()
            .map(|&(n_s, seed)| {
                let result = (|| {
                    let model = spec.problem.build()?;
                    let mut cfg = spec.config.clone();
                    cfg.n_s = n_s;
                    cfg.seed = seed;
                    cfg.validate()?;
                    optimizer::run(model.as_ref(), &cfg)
                })();
                ((n_s, seed), result)
            })
            .collect()
    });

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for ((n_s, seed), result) in members {
        match result {
            Ok(trace) => rows.extend(member_rows(&trace, n_s, seed)),
            Err(e) => failures.push(format!("n_s={n_s} seed={seed}: {e}")),
        }
    }
    Ok(SensitivityOutcome { rows, failures })
}

pub fn sensitivity_to_csv(rows: &[SensitivityRow]) -> String {
    let mut out = String::from(SENSITIVITY_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.n_s,
            r.seed,
            r.k,
            format_f64(r.sweeps),
            format_f64(r.train_loss),
            format_f64(r.test_loss),
        ));
    }
    out
}

pub fn parse_sensitivity_csv(text: &str) -> CoreResult<Vec<SensitivityRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == SENSITIVITY_HEADER => {}
        other => {
            return Err(CoreError::Parse {
                what: "sensitivity header".into(),
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
        if fields.len() != 6 {
            return Err(CoreError::Parse {
                what: "sensitivity row".into(),
                line: line_no,
                detail: format!("expected 6 fields, got {}", fields.len()),
            });
        }
        let uint = |s: &str, what: &'static str| -> CoreResult<u64> {
            s.parse().map_err(|_| CoreError::Parse {
                what: what.into(),
                line: line_no,
                detail: format!("got `{s}`"),
            })
        };
        rows.push(SensitivityRow {
            n_s: uint(fields[0], "sensitivity n_s")? as usize,
            seed: uint(fields[1], "sensitivity seed")?,
            k: uint(fields[2], "sensitivity k")? as usize,
            sweeps: parse_f64(fields[3], "sensitivity sweeps", line_no)?,
            train_loss: parse_f64(fields[4], "sensitivity train_loss", line_no)?,
            test_loss: parse_f64(fields[5], "sensitivity test_loss", line_no)?,
        });
    }
    Ok(rows)
}
