//! Outer iteration drivers: the low-rank saddle-free Newton step, the
//! inexact Newton-Krylov step, first-order baselines, and the budgeted run
//! loop that strings them together with batch policies, line search,
//! stationarity termination, and exact sweep accounting.

mod config;
mod linesearch;
mod trace;

pub use config::{AlphaPolicy, Batching, ForcingMode, Method, OptimizerConfig};
pub use linesearch::{
    baseline_step, check_stationary, line_search, BaselineState, LineSearchResult, ADAM_BETA1,
    ADAM_BETA2, ADAM_EPS, ARMIJO_C1, BACKTRACK_FACTOR, MAX_BACKTRACKS,
};
pub use trace::{
    parse_trace_csv, read_trace_csv, sweep_budget_report, trace_to_csv, write_trace_csv,
    BudgetReport, BudgetRow, InnerDetail, IterationRecord, RunTrace, TerminationStatus, TraceRow,
    TRACE_HEADER,
};

use crate::krylov::{cg_solve, forcing_eta, gmres_solve, minres_solve, KrylovOptions};
use crate::lowrank::{randomized_eig, smw_solve};
use crate::model::{
    sample_batch, Batch, BatchHessianOperator, DifferentiableModel, Metered, Split,
};
use crate::numerics::{self, norm2, CountingOperator, SeededRng};
use crate::{CoreError, CoreResult};

/// Which Krylov solver backs an inexact Newton step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KrylovKind {
    Cg,
    Minres,
    Gmres,
}

/// Everything one outer step produces besides ledger side effects.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub w_next: Vec<f64>,
    pub alpha: f64,
    /// Norm of the regularized batch gradient at the pre-step iterate.
    pub grad_norm: f64,
    /// Norm of the (unscaled) step direction.
    pub step_norm: f64,
    pub inner_detail: InnerDetail,
    /// Raw-curvature estimate for the stationarity guard (`+∞` when the
    /// step probed no curvature).
    pub curvature_estimate: f64,
    /// Loss-only evaluations (reference + trials; 0 under fixed alpha).
    pub ls_evals: usize,
    pub taken_anyways: bool,
}

/// Resolve the step size per the configured policy. Line search meters one
/// reference evaluation plus its trials through the model.
fn resolve_alpha<M: DifferentiableModel + ?Sized>(
    model: &M,
    w: &[f64],
    p: &[f64],
    g: &[f64],
    x_k: &Batch,
    cfg: &OptimizerConfig,
) -> CoreResult<(f64, usize, bool)> {
    match cfg.alpha_policy {
        AlphaPolicy::Fixed { alpha } => Ok((alpha, 0, false)),
        AlphaPolicy::LineSearch { alpha0 } => {
            let f0 = model.loss(w, Split::Train, x_k)?;
            if !f0.is_finite() {
                return Err(CoreError::StepRejected {
                    alpha: 0.0,
                    step_norm: norm2(p),
                    reason: "reference loss for the line search is non-finite".into(),
                });
            }
            let ls = line_search(
                model,
                w,
                p,
                g,
                Split::Train,
                x_k,
                f0,
                alpha0,
                cfg.ls_take_best,
            )?;
            Ok((ls.alpha, ls.evals + 1, !ls.accepted))
        }
    }
}

/// One low-rank Newton step: randomized eigendecomposition of the raw
/// subsampled Hessian, optional saddle-free spectrum flip (skipped only by
/// the plain low-rank Newton method), Sherman–Morrison–Woodbury solve, and
/// the step-size policy. Sweep cost: `N_X` for the gradient plus
/// `2·(sketch applies)·N_S` for the factorization — `N_X + 4(r+p)N_S` on
/// the healthy path — plus line-search halves.
pub fn step_lrsfn<M: DifferentiableModel + ?Sized>(
    model: &M,
    w: &[f64],
    x_k: &Batch,
    s_k: &Batch,
    cfg: &OptimizerConfig,
    rng: &mut SeededRng,
) -> CoreResult<StepOutcome> {
    let g = model.gradient(w, Split::Train, x_k)?;
    let grad_norm = norm2(&g);
    let op = BatchHessianOperator::raw(model, w, Split::Train, s_k);
    let counting = CountingOperator::new(&op);
    let factor = randomized_eig(&counting, cfg.rank, cfg.oversample, rng)?;
    let sketch_applies = counting.count();
    let flip = cfg.method != Method::LrNewton;
    let p = smw_solve(&factor, cfg.gamma, &g, flip)?;
    let (alpha, ls_evals, taken_anyways) = resolve_alpha(model, w, &p, &g, x_k, cfg)?;
    let mut w_next = w.to_vec();
    numerics::axpy(alpha, &p, &mut w_next);
    let min_eig = factor.min_retained_eigenvalue().unwrap_or(f64::INFINITY);
    Ok(StepOutcome {
        w_next,
        alpha,
        grad_norm,
        step_norm: norm2(&p),
        inner_detail: InnerDetail::LowRank {
            rank: factor.rank(),
            min_eig,
            discarded: factor.discarded().to_vec(),
            sketch_applies,
        },
        curvature_estimate: min_eig,
        ls_evals,
        taken_anyways,
    })
}

/// One inexact Newton-Krylov step: solve `(∇²F̄_S + γI) p = −g` to the
/// forcing tolerance, stopping early on negative curvature, then apply the
/// step-size policy. Sweep cost: `N_X + 2·(operator applies)·N_S` plus
/// line-search halves.
pub fn step_inkrylov<M: DifferentiableModel + ?Sized>(
    model: &M,
    w: &[f64],
    x_k: &Batch,
    s_k: &Batch,
    cfg: &OptimizerConfig,
    kind: KrylovKind,
) -> CoreResult<StepOutcome> {
    let g = model.gradient(w, Split::Train, x_k)?;
    let grad_norm = norm2(&g);
    let eta = forcing_eta(&cfg.forcing_schedule(), grad_norm);
    let op = BatchHessianOperator::regularized(model, w, Split::Train, s_k);
    let b: Vec<f64> = g.iter().map(|x| -x).collect();
    let mut opts = KrylovOptions::new(eta);
    if let Some(max_inner) = cfg.max_inner {
        opts = opts.with_max_iter(max_inner);
    }
    let outcome = match kind {
        KrylovKind::Cg => cg_solve(&op, &b, &opts)?,
        KrylovKind::Minres => minres_solve(&op, &b, &opts)?,
        KrylovKind::Gmres => gmres_solve(&op, &b, &opts)?,
    };
    // The solvers return their last finite iterate even on breakdown; the
    // damped-gradient fallback only guards a non-finite step defensively.
    let p = if numerics::all_finite(&outcome.step) {
        outcome.step.clone()
    } else {
        g.iter().map(|x| -x / cfg.gamma).collect()
    };
    let (alpha, ls_evals, taken_anyways) = resolve_alpha(model, w, &p, &g, x_k, cfg)?;
    let mut w_next = w.to_vec();
    numerics::axpy(alpha, &p, &mut w_next);
    Ok(StepOutcome {
        w_next,
        alpha,
        grad_norm,
        step_norm: norm2(&p),
        curvature_estimate: outcome.min_rayleigh - cfg.gamma,
        inner_detail: InnerDetail::Krylov {
            iterations: outcome.iterations,
            operator_applies: outcome.operator_applies,
            termination: outcome.termination,
            residual_norm: outcome.residual_norm,
            min_rayleigh: outcome.min_rayleigh,
        },
        ls_evals,
        taken_anyways,
    })
}

/// One first-order step (also used for warm-up iterations of the Newton
/// methods). Sweep cost: `N_X` plus line-search halves.
pub fn step_first_order<M: DifferentiableModel + ?Sized>(
    model: &M,
    w: &[f64],
    x_k: &Batch,
    cfg: &OptimizerConfig,
    state: &mut BaselineState,
) -> CoreResult<StepOutcome> {
    let g = model.gradient(w, Split::Train, x_k)?;
    let grad_norm = norm2(&g);
    let (alpha, ls_evals, taken_anyways) = match cfg.alpha_policy {
        AlphaPolicy::Fixed { alpha } => (alpha, 0, false),
        AlphaPolicy::LineSearch { .. } => {
            let p: Vec<f64> = g.iter().map(|x| -x).collect();
            resolve_alpha(model, w, &p, &g, x_k, cfg)?
        }
    };
    let w_next = baseline_step(state, w, &g, alpha);
    let step_norm = norm2(&numerics::sub(&w_next, w)?) / alpha.max(f64::MIN_POSITIVE);
    Ok(StepOutcome {
        w_next,
        alpha,
        grad_norm,
        step_norm,
        inner_detail: InnerDetail::None,
        curvature_estimate: f64::INFINITY,
        ls_evals,
        taken_anyways,
    })
}

/// Drive a full budgeted run: seed-deterministic initialization and batch
/// draws, per-method dispatch with warm-up gradient steps, full-split loss
/// reporting through a separate unbudgeted ledger, and termination on
/// budget, stationarity, or step rejection (partial trace retained).
pub fn run<M: DifferentiableModel + ?Sized>(
    model: &M,
    cfg: &OptimizerConfig,
) -> CoreResult<RunTrace> {
    cfg.validate_for(model)?;
    let d = model.dim();
    let mut rng = SeededRng::new(cfg.seed);

    let metered = Metered::new(model);
    let ledger = metered.ledger();
    let eval = Metered::new(model);
    let eval_ledger = eval.ledger();

    let mut w = rng.normal_vec(d);
    numerics::scale(cfg.init_scale, &mut w);

    let n_train = model.num_samples(Split::Train);
    let mut order: Vec<usize> = (0..n_train).collect();
    rng.shuffle(&mut order);
    let mut semi: Vec<usize> = order[..cfg.n_x].to_vec();
    semi.sort_unstable();
    let semi_batch = Batch::new(semi)?;
    let train_full = Batch::full(n_train)?;
    let test_full = Batch::full(model.num_samples(Split::Test))?;

    let mut records: Vec<IterationRecord> = Vec::new();
    let mut iterates = cfg.keep_iterates.then(Vec::new);

    let train0 = eval.loss(&w, Split::Train, &train_full)?;
    let test0 = eval.loss_raw(&w, Split::Test, &test_full)?;
    if !train0.is_finite() {
        return Err(CoreError::InvalidConfig(
            "initial training loss is non-finite; lower init_scale".into(),
        ));
    }
    let g0 = eval.gradient(&w, Split::Train, &train_full)?;
    records.push(IterationRecord {
        k: 0,
        cumulative_sweeps: 0.0,
        train_loss: train0,
        test_loss: test0,
        grad_norm: norm2(&g0),
        alpha: 0.0,
        inner_detail: InnerDetail::None,
        wall_time_s: 0.0,
        nx: 0,
        ns: 0,
        ls_evals: 0,
        taken_anyways: false,
    });
    if let Some(list) = iterates.as_mut() {
        list.push(w.clone());
    }

    let mut state = BaselineState::new(cfg.method == Method::Adam, d);
    let warmup = cfg.warmup();
    let mut k = 0usize;
    let status;
    loop {
        if ledger.sweeps() >= cfg.max_sweeps {
            status = TerminationStatus::Budget;
            break;
        }
        k += 1;
        let x_k = match cfg.batching {
            Batching::SemiStochastic => semi_batch.clone(),
            Batching::FullyStochastic { fraction } => {
                let size = ((fraction * cfg.n_x as f64).round() as usize).clamp(1, n_train);
                sample_batch(&mut rng, n_train, size, false)?
            }
        };
        let needs_hessian = k > warmup && cfg.method.is_newton();
        let s_k = if needs_hessian {
            Some(x_k.subsample(cfg.n_s.min(x_k.len()), &mut rng)?)
        } else {
            None
        };

        let step = if k <= warmup || cfg.method.is_first_order() {
            step_first_order(&metered, &w, &x_k, cfg, &mut state)
        } else if cfg.method.is_low_rank() {
            step_lrsfn(&metered, &w, &x_k, s_k.as_ref().unwrap(), cfg, &mut rng)
        } else {
            let kind = match cfg.method {
                Method::Incg => KrylovKind::Cg,
                Method::Inminres => KrylovKind::Minres,
                Method::Ingmres => KrylovKind::Gmres,
                _ => unreachable!("non-Krylov methods are dispatched above"),
            };
            step_inkrylov(&metered, &w, &x_k, s_k.as_ref().unwrap(), cfg, kind)
        };
        let out = match step {
            Ok(out) => out,
            Err(CoreError::StepRejected {
                alpha,
                step_norm,
                reason,
            }) => {
                status = TerminationStatus::StepRejected {
                    alpha,
                    step_norm,
                    reason,
                };
                break;
            }
            Err(other) => return Err(other),
        };

        let train_loss = eval.loss(&out.w_next, Split::Train, &train_full)?;
        let test_loss = eval.loss_raw(&out.w_next, Split::Test, &test_full)?;
        if !numerics::all_finite(&out.w_next) || !train_loss.is_finite() {
            status = TerminationStatus::StepRejected {
                alpha: out.alpha,
                step_norm: out.step_norm,
                reason: "non-finite iterate or training loss after the step".into(),
            };
            break;
        }
        w = out.w_next;
        records.push(IterationRecord {
            k,
            cumulative_sweeps: ledger.sweeps(),
            train_loss,
            test_loss,
            grad_norm: out.grad_norm,
            alpha: out.alpha,
            inner_detail: out.inner_detail,
            wall_time_s: 0.0,
            nx: x_k.len(),
            ns: s_k.as_ref().map_or(0, |s| s.len()),
            ls_evals: out.ls_evals,
            taken_anyways: out.taken_anyways,
        });
        if let Some(list) = iterates.as_mut() {
            list.push(w.clone());
        }
        if check_stationary(out.grad_norm, out.curvature_estimate, cfg) {
            status = TerminationStatus::Stationary;
            break;
        }
    }

    let best_train = records
        .iter()
        .map(|r| r.train_loss)
        .fold(f64::INFINITY, f64::min);
    let best_test = records
        .iter()
        .map(|r| r.test_loss)
        .fold(f64::INFINITY, f64::min);
    Ok(RunTrace {
        config: cfg.clone(),
        records,
        final_w: w,
        best_train,
        best_test,
        status,
        budget_sweeps: ledger.sweeps(),
        eval_sweeps: eval_ledger.sweeps(),
        iterates,
    })
}
