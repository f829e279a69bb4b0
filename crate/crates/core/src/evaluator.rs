//! Checkpointed training with early termination, and selection of which
//! curve points enter the model.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::Backend;
use crate::planner::conservative_stopping_for;
use crate::surrogate::{Conditionable, Surrogate};
use crate::types::{CurveObservation, Query};

/// At most this many points of one curve enter the model.
pub const MAX_CURVE_POINTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    /// Checkpoint block as a fraction of `t_max`.
    pub block_fraction: f64,
    /// Uncertainty factor τ guarding early termination.
    pub tau: f64,
    /// Tolerance ε of conservative stopping.
    pub epsilon: f64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            block_fraction: 0.2,
            tau: 2.0,
            epsilon: 0.01,
        }
    }
}

/// `ceil(p · t_max)` epochs, at least one and at most `t_max`.
pub fn block_size(p: f64, t_max: u32) -> u32 {
    // The small slack keeps products like 0.2 · 50 from rounding up to 11.
    let b = (p * t_max as f64 - 1e-9).ceil();
    (b.max(1.0) as u32).min(t_max.max(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    CompletedTOpt,
    EarlyTerminated,
    BudgetExhausted,
    Failed,
}

/// What happened at one early-termination check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkpoint {
    pub epoch: u32,
    /// Re-estimated conservative stop.
    pub t_opt: u32,
    pub mean_at_t_opt: f64,
    pub sd_at_t_opt: f64,
    /// Posterior sd at `epoch` before this block's points were added.
    pub sd_at_epoch: f64,
    pub terminated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub x: Vec<f64>,
    /// Epoch the configuration had already been trained to.
    pub resumed_from: u32,
    /// Newly trained epochs, in order.
    pub curve: Vec<CurveObservation>,
    pub stop: StopReason,
    /// Backend cost of the new epochs only.
    pub charged: f64,
    pub checkpoints: Vec<Checkpoint>,
    pub error: Option<String>,
}

impl EvalOutcome {
    pub fn last_epoch(&self) -> u32 {
        self.curve.last().map_or(self.resumed_from, |o| o.epoch)
    }
}

/// State the evaluator needs from the optimizer.
pub struct EvalContext<'a, S> {
    /// Objective model before this evaluation.
    pub model: &'a S,
    pub y_best: f64,
    /// Epoch `x` has already been paid for (0 if fresh).
    pub paid_epoch: u32,
    pub budget_remaining: f64,
}

/// Decision taken at a checkpoint below the current target.
enum Verdict {
    Continue,
    Retarget(u32),
    Stop(StopReason),
}

/// Trains `x` from `paid` towards `target` in blocks of `block` epochs,
/// asking `check` what to do at every block boundary short of the target.
fn run_blocks<B: Backend + ?Sized>(
    backend: &B,
    x: &[f64],
    paid: u32,
    mut target: u32,
    block: u32,
    budget_remaining: f64,
    mut check: impl FnMut(&[CurveObservation], u32) -> Verdict,
) -> Result<EvalOutcome> {
    let t_max = backend.t_max();
    if paid >= t_max {
        return Err(Error::ParameterDomain(format!("configuration already trained to t_max = {t_max}")));
    }
    if target == 0 || target > t_max {
        return Err(Error::ParameterDomain(format!("target epoch {target} outside 1..={t_max}")));
    }
    target = target.max(paid + 1);
    let mut out = EvalOutcome {
        x: x.to_vec(),
        resumed_from: paid,
        curve: Vec::new(),
        stop: StopReason::CompletedTOpt,
        charged: 0.0,
        checkpoints: Vec::new(),
        error: None,
    };
    let fail = |mut out: EvalOutcome, e: Error| {
        out.stop = StopReason::Failed;
        out.error = Some(e.to_string());
        Ok(out)
    };
    let cost_paid = if paid == 0 {
        0.0
    } else {
        match backend.evaluate(x, paid) {
            Ok((_, c)) => c,
            Err(e) => return fail(out, e),
        }
    };

    let mut t = paid;
    loop {
        let next = (t + block).min(target);
        for e in t + 1..=next {
            match backend.evaluate(x, e) {
                Ok((value, cost)) => {
                    out.curve.push(CurveObservation {
                        x: x.to_vec(),
                        epoch: e,
                        value,
                        cumulative_cost: cost,
                    });
                    out.charged = (cost - cost_paid).max(0.0);
                }
                Err(err) => return fail(out, err),
            }
        }
        t = next;
        if t >= target {
            out.stop = StopReason::CompletedTOpt;
            return Ok(out);
        }
        if out.charged >= budget_remaining {
            out.stop = StopReason::BudgetExhausted;
            return Ok(out);
        }
        match check(&out.curve, t) {
            Verdict::Continue => {}
            Verdict::Retarget(n) => target = n.min(t_max),
            Verdict::Stop(reason) => {
                out.stop = reason;
                return Ok(out);
            }
        }
    }
}

/// Trains `x` to `target` in checkpoint blocks with no early termination,
/// stopping only when the target is reached or the budget is used up.
pub fn train_plain<B: Backend + ?Sized>(
    backend: &B,
    x: &[f64],
    target: u32,
    paid_epoch: u32,
    budget_remaining: f64,
    block_fraction: f64,
) -> Result<EvalOutcome> {
    let block = block_size(block_fraction, backend.t_max());
    run_blocks(backend, x, paid_epoch, target, block, budget_remaining, |_, _| Verdict::Continue)
}

/// Trains `x` towards `t_opt` in blocks, checking after each block whether
/// the run should be abandoned.
///
/// After a block ending at epoch `t` (below the current target) the model is
/// conditioned on the selected points of the curve so far and the
/// conservative stop `t_n` re-estimated. Training stops if
/// `μ(x, t_n) ≤ y_best` and `σ(x, t_n) ≤ τ σ(x, t)`, otherwise continues to
/// `min(t_n, t + block)`. Training also stops once the charge reaches the
/// remaining budget.
pub fn evaluate<B, S>(backend: &B, x: &[f64], t_opt: u32, ctx: &EvalContext<'_, S>, settings: &EvalSettings) -> Result<EvalOutcome>
where
    B: Backend + ?Sized,
    S: Conditionable,
{
    let t_max = backend.t_max();
    let block = block_size(settings.block_fraction, t_max);
    let mut current: Option<S> = None;
    let mut checkpoints = Vec::new();

    let check = |curve: &[CurveObservation], t: u32| -> Verdict {
        let attempt = (|| -> Result<(Checkpoint, S)> {
            let before = current.as_ref().unwrap_or(ctx.model);
            let sd_at_epoch = before.predict(&Query::at_epoch(x, t, t_max))?.std_dev();
            let picked = select_curve_points(ctx.model, curve, t_max)?;
            let extra: Vec<(Query, f64)> = picked.iter().map(|o| (o.query(t_max), o.value)).collect();
            let refreshed = ctx.model.condition_on(&extra)?;
            let t_n = conservative_stopping_for(&refreshed, x, t_max, settings.epsilon)?;
            let post = refreshed.predict(&Query::at_epoch(x, t_n, t_max))?;
            let terminated = post.mean <= ctx.y_best && post.std_dev() <= settings.tau * sd_at_epoch;
            let cp = Checkpoint {
                epoch: t,
                t_opt: t_n,
                mean_at_t_opt: post.mean,
                sd_at_t_opt: post.std_dev(),
                sd_at_epoch,
                terminated,
            };
            Ok((cp, refreshed))
        })();
        match attempt {
            Ok((cp, refreshed)) => {
                checkpoints.push(cp);
                current = Some(refreshed);
                if cp.terminated {
                    Verdict::Stop(StopReason::EarlyTerminated)
                } else if cp.t_opt <= t {
                    // Already at or past the re-estimated stop.
                    Verdict::Stop(StopReason::CompletedTOpt)
                } else {
                    Verdict::Retarget(cp.t_opt)
                }
            }
            Err(e) => {
                warn!("skipping early-termination check at epoch {t}: {e}");
                Verdict::Continue
            }
        }
    };
    let mut out = run_blocks(backend, x, ctx.paid_epoch, t_opt, block, ctx.budget_remaining, check)?;
    out.checkpoints = checkpoints;
    Ok(out)
}

/// The last point of `curve` plus up to two others with the largest posterior
/// variance under `model`, returned in epoch order. Ties favour earlier epochs.
pub fn select_curve_points<S: Surrogate + ?Sized>(model: &S, curve: &[CurveObservation], t_max: u32) -> Result<Vec<CurveObservation>> {
    let Some(last) = curve.last() else {
        return Err(Error::ParameterDomain("empty curve".into()));
    };
    if curve.len() <= MAX_CURVE_POINTS {
        return Ok(curve.to_vec());
    }
    let along = model.along_epochs(&last.x)?;
    let mut scored = Vec::with_capacity(curve.len() - 1);
    for (i, o) in curve[..curve.len() - 1].iter().enumerate() {
        scored.push((i, along(o.epoch as f64 / t_max as f64)?.variance));
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut keep: Vec<usize> = scored.iter().take(MAX_CURVE_POINTS - 1).map(|s| s.0).collect();
    keep.sort_unstable();
    let mut out: Vec<CurveObservation> = keep.into_iter().map(|i| curve[i].clone()).collect();
    out.push(last.clone());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{Dataset, GpModel, Scaling};
    use crate::kernels::{KernelSpec, TimeKernel};
    use crate::learners::{CurveFamily, Smooth, SyntheticProblem};
    use crate::monotonic::{MonotoneGp, MonotoneSettings};

    fn obs(epoch: u32, value: f64) -> CurveObservation {
        CurveObservation {
            x: vec![0.5],
            epoch,
            value,
            cumulative_cost: epoch as f64,
        }
    }

    #[test]
    fn block_arithmetic() {
        assert_eq!(block_size(0.2, 50), 10);
        assert_eq!(block_size(0.2, 12), 3);
        assert_eq!(block_size(0.01, 10), 1);
        assert_eq!(block_size(1.0, 7), 7);
    }

    #[test]
    fn short_curves_are_kept_whole() {
        let m = GpModel::new(
            KernelSpec::product(1, 0.3, TimeKernel::Rbf { lengthscale: 0.2 }),
            Dataset::empty(1e-4),
            Scaling::Standardize,
        )
        .unwrap();
        assert_eq!(select_curve_points(&m, &[obs(4, 0.1)], 20).unwrap(), vec![obs(4, 0.1)]);
        let two = vec![obs(1, 0.1), obs(2, 0.2)];
        assert_eq!(select_curve_points(&m, &two, 20).unwrap(), two);
        assert!(select_curve_points(&m, &[], 20).is_err());
    }

    #[test]
    fn variance_peaks_are_selected() {
        // Observed everywhere except around epochs 3 and 11, so the posterior
        // variance along the curve peaks there.
        let t_max = 20;
        let mut data = Dataset::empty(1e-6);
        for e in 1..=t_max {
            if ![3, 11].contains(&e) {
                data.push(Query::at_epoch(&[0.5], e, t_max), 0.0);
            }
        }
        let m = GpModel::new(
            KernelSpec::product(1, 0.3, TimeKernel::Rbf { lengthscale: 0.03 }),
            data,
            Scaling::None,
        )
        .unwrap();
        let curve: Vec<_> = (1..=t_max).map(|e| obs(e, e as f64 / 20.0)).collect();
        let picked: Vec<u32> = select_curve_points(&m, &curve, t_max).unwrap().iter().map(|o| o.epoch).collect();
        assert_eq!(picked, vec![3, 11, 20]);
    }

    fn flat_problem(y_inf: f64, lambda: f64) -> SyntheticProblem {
        SyntheticProblem {
            dim: 1,
            t_max: 20,
            family: CurveFamily::Exponential,
            asymptote: Smooth::constant(y_inf),
            rate: Smooth::constant(lambda),
            midpoint: Smooth::constant(10.0),
            slope: Smooth::constant(1.0),
            overhead: Smooth::constant(0.0),
            cost_coupling: 0.0,
            rate_coupling: 0.0,
            noise_sd: 0.0,
            seed: 0,
        }
    }

    fn empty_model() -> MonotoneGp {
        let base = GpModel::new(
            KernelSpec::product(1, 0.3, TimeKernel::Rbf { lengthscale: 0.3 }),
            Dataset::empty(1e-4),
            Scaling::None,
        )
        .unwrap();
        MonotoneGp::new(base, MonotoneSettings::default()).unwrap()
    }

    #[test]
    fn single_block_runs_without_checks() {
        let p = flat_problem(0.5, 2.0);
        let m = empty_model();
        let ctx = EvalContext { model: &m, y_best: 0.9, paid_epoch: 0, budget_remaining: 100.0 };
        let out = evaluate(&p, &[0.2], 4, &ctx, &EvalSettings::default()).unwrap();
        assert_eq!(out.stop, StopReason::CompletedTOpt);
        assert!(out.checkpoints.is_empty());
        assert_eq!(out.curve.iter().map(|o| o.epoch).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
        assert_eq!(out.charged, 4.0);
    }

    #[test]
    fn resumed_runs_are_charged_incrementally() {
        let p = flat_problem(0.5, 2.0);
        let m = empty_model();
        let ctx = EvalContext { model: &m, y_best: 0.9, paid_epoch: 4, budget_remaining: 100.0 };
        let out = evaluate(&p, &[0.2], 7, &ctx, &EvalSettings::default()).unwrap();
        assert_eq!(out.curve.first().unwrap().epoch, 5);
        assert_eq!(out.last_epoch(), 7);
        assert_eq!(out.charged, 3.0);
    }

    #[test]
    fn budget_stops_at_a_checkpoint() {
        let p = flat_problem(0.5, 2.0);
        let m = empty_model();
        let ctx = EvalContext { model: &m, y_best: 0.0, paid_epoch: 0, budget_remaining: 5.0 };
        let out = evaluate(&p, &[0.2], 20, &ctx, &EvalSettings::default()).unwrap();
        assert_eq!(out.stop, StopReason::BudgetExhausted);
        assert_eq!(out.last_epoch(), 8);
        assert_eq!(out.charged, 8.0);
    }

    #[test]
    fn uncertain_model_never_terminates() {
        // The prior-only model is equally unsure everywhere, but τ = 0 makes
        // the certainty condition fail at every check.
        let p = flat_problem(0.3, 2.0);
        let m = empty_model();
        let ctx = EvalContext { model: &m, y_best: 0.9, paid_epoch: 0, budget_remaining: 1e9 };
        let s = EvalSettings { tau: 0.0, ..Default::default() };
        let out = evaluate(&p, &[0.2], 20, &ctx, &s).unwrap();
        assert_ne!(out.stop, StopReason::EarlyTerminated);
        assert!(out.checkpoints.iter().all(|c| !c.terminated));
    }

    #[test]
    fn rejects_bad_targets() {
        let p = flat_problem(0.3, 2.0);
        let m = empty_model();
        let ctx = EvalContext { model: &m, y_best: 0.9, paid_epoch: 20, budget_remaining: 1.0 };
        assert!(evaluate(&p, &[0.2], 20, &ctx, &EvalSettings::default()).is_err());
        let ctx = EvalContext { model: &m, y_best: 0.9, paid_epoch: 0, budget_remaining: 1.0 };
        assert!(evaluate(&p, &[0.2], 21, &ctx, &EvalSettings::default()).is_err());
    }
}
