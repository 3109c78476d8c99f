//! `snk` — command-line front end for the optimizer harness.
//!
//! Subcommands: `run`, `ensemble`, `spectrum`, `sensitivity`, `verify-bound`,
//! `summarize`. Every experiment is described by a flat JSON config file;
//! flags override the seed and output directory. Usage errors exit with
//! code 2 (clap's default); operational failures exit 1 with a one-line
//! diagnostic on stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use snk_core::optimizer::{run, write_trace_csv, OptimizerConfig};

use snk_harness::bounds::{bound_reports_to_csv, render_report, BoundSpec};
use snk_harness::ensemble::{run_ensemble, summarize_dir, summary_to_csv};
use snk_harness::experiment::{run_stem, RunSpec};
use snk_harness::sensitivity::{batch_sensitivity, sensitivity_to_csv, SensitivitySpec};
use snk_harness::spectrum::{spectrum_probe, SpectrumSpec};
use snk_harness::ExperimentSpec;

#[derive(Parser)]
#[command(
    name = "snk",
    version,
    about = "Stochastic Newton-type optimization experiments",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute a single optimization run and write its trace CSV.
    Run {
        /// JSON file with {problem, config, output_dir?}.
        #[arg(long)]
        config: PathBuf,
        /// Override the run seed from the config file.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (falls back to SNK_OUT, then the config file,
        /// then ./out).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every (config, seed) pair of an experiment and summarize.
    Ensemble {
        /// JSON file with {problem, configs, seeds, output_dir?}.
        #[arg(long)]
        config: PathBuf,
        /// Replace the config's seed list with this single seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Concurrent runs (default: available parallelism).
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run with stored iterates, then dump Hessian spectra along the path.
    Spectrum {
        /// JSON file with {problem, config, ranks?, every?, output_dir?}.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep Hessian-subsample sizes and collect loss-vs-sweeps curves.
    Sensitivity {
        /// JSON file with {problem, config, seeds, n_s_values, output_dir?}.
        #[arg(long)]
        config: PathBuf,
        /// Replace the config's seed list with this single seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo check of the one-step error envelopes on a quadratic.
    VerifyBound {
        /// JSON file with {problem, config, bounds?, trials, distances,
        /// output_dir?}.
        #[arg(long)]
        config: PathBuf,
        /// Override the sampling seed from the config file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute ensemble summary statistics from a directory of runs.
    Summarize {
        /// Directory holding the per-run status/trace files.
        #[arg(long)]
        dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("snk: {err:#}");
            ExitCode::FAILURE
        }
    }
}

/// Output directory precedence: `--out` flag, `SNK_OUT` environment
/// variable, the config file's `output_dir`, then `./out`.
fn resolve_out(flag: Option<PathBuf>, from_config: Option<&Path>) -> PathBuf {
    if let Some(dir) = flag {
        return dir;
    }
    if let Some(dir) = std::env::var_os("SNK_OUT") {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    if let Some(dir) = from_config {
        return dir.to_path_buf();
    }
    PathBuf::from("out")
}

fn override_seed(cfg: &mut OptimizerConfig, seed: Option<u64>) {
    if let Some(s) = seed {
        cfg.seed = s;
    }
}

fn dispatch(cmd: Cmd) -> anyhow::Result<()> {
    match cmd {
        Cmd::Run { config, seed, out } => cmd_run(&config, seed, out),
        Cmd::Ensemble {
            config,
            seed,
            jobs,
            out,
        } => cmd_ensemble(&config, seed, jobs, out),
        Cmd::Spectrum { config, seed, out } => cmd_spectrum(&config, seed, out),
        Cmd::Sensitivity {
            config,
            seed,
            jobs,
            out,
        } => cmd_sensitivity(&config, seed, jobs, out),
        Cmd::VerifyBound { config, seed, out } => cmd_verify_bound(&config, seed, out),
        Cmd::Summarize { dir } => cmd_summarize(&dir),
    }
}

fn load_context(path: &Path) -> String {
    format!("reading config `{}`", path.display())
}

fn default_jobs() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

fn cmd_run(config: &Path, seed: Option<u64>, out: Option<PathBuf>) -> anyhow::Result<()> {
    let spec = RunSpec::load(config).with_context(|| load_context(config))?;
    let mut cfg = spec.config.clone();
    override_seed(&mut cfg, seed);
    let out_dir = resolve_out(out, spec.output_dir.as_deref());
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating output dir `{}`", out_dir.display()))?;

    let model = spec.problem.build().context("building the problem")?;
    let trace = run(model.as_ref(), &cfg).context("optimizer run failed")?;
    let stem = run_stem(0, cfg.method.as_str(), cfg.seed);
    let trace_path = out_dir.join(format!("trace_{stem}.csv"));
    write_trace_csv(&trace, &trace_path)
        .with_context(|| format!("writing `{}`", trace_path.display()))?;
    println!(
        "{}: {} iterations, {:.1} sweeps, best train {:.6e}, best test {:.6e} -> {}",
        cfg.method.as_str(),
        trace.records.len(),
        trace.budget_sweeps,
        trace.best_train,
        trace.best_test,
        trace_path.display()
    );
    Ok(())
}

fn cmd_ensemble(
    config: &Path,
    seed: Option<u64>,
    jobs: Option<usize>,
    out: Option<PathBuf>,
) -> anyhow::Result<()> {
    let mut spec = ExperimentSpec::load(config).with_context(|| load_context(config))?;
    if let Some(s) = seed {
        spec.seeds = vec![s];
    }
    let out_dir = resolve_out(out, spec.output_dir.as_deref());
    let summary = run_ensemble(&spec, &out_dir, jobs.unwrap_or_else(default_jobs))
        .context("ensemble failed")?;
    print!("{}", summary_to_csv(&summary));
    eprintln!(
        "ensemble: {} runs -> {}",
        spec.configs.len() * spec.seeds.len(),
        out_dir.display()
    );
    Ok(())
}

fn cmd_spectrum(config: &Path, seed: Option<u64>, out: Option<PathBuf>) -> anyhow::Result<()> {
    let spec = SpectrumSpec::load(config).with_context(|| load_context(config))?;
    let mut cfg = spec.config.clone();
    override_seed(&mut cfg, seed);
    cfg.keep_iterates = true;
    let out_dir = resolve_out(out, spec.output_dir.as_deref());
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating output dir `{}`", out_dir.display()))?;

    let model = spec.problem.build().context("building the problem")?;
    let trace = run(model.as_ref(), &cfg).context("optimizer run failed")?;
    let csv = spectrum_probe(model.as_ref(), &trace, spec.ranks, spec.every)
        .context("spectrum probe failed")?;
    let stem = run_stem(0, cfg.method.as_str(), cfg.seed);
    let path = out_dir.join(format!("spectrum_{stem}.csv"));
    std::fs::write(&path, &csv).with_context(|| format!("writing `{}`", path.display()))?;
    println!(
        "spectrum: {} iterates probed at stride {}, ranks {} -> {}",
        trace.iterates.as_ref().map(|it| it.len()).unwrap_or(0),
        spec.every,
        spec.ranks,
        path.display()
    );
    Ok(())
}

fn cmd_sensitivity(
    config: &Path,
    seed: Option<u64>,
    jobs: Option<usize>,
    out: Option<PathBuf>,
) -> anyhow::Result<()> {
    let mut spec = SensitivitySpec::load(config).with_context(|| load_context(config))?;
    if let Some(s) = seed {
        spec.seeds = vec![s];
    }
    let out_dir = resolve_out(out, spec.output_dir.as_deref());
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating output dir `{}`", out_dir.display()))?;
    let outcome =
        batch_sensitivity(&spec, jobs.unwrap_or_else(default_jobs)).context("sensitivity failed")?;
    let path = out_dir.join("sensitivity.csv");
    std::fs::write(&path, sensitivity_to_csv(&outcome.rows))
        .with_context(|| format!("writing `{}`", path.display()))?;
    for failure in &outcome.failures {
        eprintln!("sensitivity: incomplete member: {failure}");
    }
    println!(
        "sensitivity: {} rows over n_s {:?} -> {}",
        outcome.rows.len(),
        spec.n_s_values,
        path.display()
    );
    Ok(())
}

fn cmd_verify_bound(config: &Path, seed: Option<u64>, out: Option<PathBuf>) -> anyhow::Result<()> {
    let spec = BoundSpec::load(config).with_context(|| load_context(config))?;
    let mut cfg = spec.config.clone();
    override_seed(&mut cfg, seed);
    let out_dir = resolve_out(out, spec.output_dir.as_deref());
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating output dir `{}`", out_dir.display()))?;
    let problem = spec
        .problem
        .build_quadratic()
        .context("bound checks need a quadratic problem")?;

    let mut reports = Vec::with_capacity(spec.bounds.len());
    let mut total_violations = 0;
    for kind in &spec.bounds {
        let report = snk_harness::verify_bound(&problem, &cfg, *kind, spec.trials, &spec.distances)
            .with_context(|| format!("verifying `{}`", kind.name()))?;
        print!("{}", render_report(&report));
        total_violations += report.violations;
        reports.push(report);
    }
    let csv_path = out_dir.join("bound_checks.csv");
    std::fs::write(&csv_path, bound_reports_to_csv(&reports))
        .with_context(|| format!("writing `{}`", csv_path.display()))?;
    let json_path = out_dir.join("bound_report.json");
    std::fs::write(&json_path, serde_json::to_string_pretty(&reports)?)
        .with_context(|| format!("writing `{}`", json_path.display()))?;
    println!(
        "verify-bound: {} envelopes, {} violations -> {}",
        reports.len(),
        total_violations,
        csv_path.display()
    );
    Ok(())
}

fn cmd_summarize(dir: &Path) -> anyhow::Result<()> {
    let summary =
        summarize_dir(dir).with_context(|| format!("summarizing `{}`", dir.display()))?;
    print!("{}", summary_to_csv(&summary));
    Ok(())
}
