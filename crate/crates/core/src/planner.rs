//! The budget-aware optimization loop: budget ledger, conservative stopping,
//! adaptive-horizon planning and cost-weighted input selection.

use log::info;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{ei, greedy_append_where, AcqOptions, CandidateDomain, FantasyBatch};
use crate::cost::{CostModel, CostRecord, RestartState};
use crate::design::scrambled_halton;
use crate::error::{Error, Result};
use crate::evaluator::{block_size, evaluate, select_curve_points, train_plain, EvalContext, EvalOutcome, EvalSettings, StopReason};
use crate::gp::{fit_hyperparams, Dataset, FitOptions, GpModel, HyperBounds, Scaling};
use crate::kernels::{KernelSpec, TimeKernel};
use crate::learners::Backend;
use crate::monotonic::{MonotoneGp, MonotoneSettings};
use crate::surrogate::Surrogate;
use crate::trace::{Trace, TraceEvent, TraceRow};
use crate::types::{lex_cmp, CurveObservation, Query};

/// Exact accounting of actual charges against a total budget.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetLedger {
    total: f64,
    spent: f64,
    charges: Vec<f64>,
}

impl BudgetLedger {
    pub fn new(total: f64) -> Result<Self> {
        if !(total.is_finite() && total >= 0.0) {
            return Err(Error::ParameterDomain(format!("budget must be finite and nonnegative, got {total}")));
        }
        Ok(BudgetLedger { total, spent: 0.0, charges: Vec::new() })
    }

    pub fn charge(&mut self, cost: f64) -> Result<()> {
        if !(cost.is_finite() && cost >= 0.0) {
            return Err(Error::ParameterDomain(format!("charge must be finite and nonnegative, got {cost}")));
        }
        self.spent += cost;
        self.charges.push(cost);
        Ok(())
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn spent(&self) -> f64 {
        self.spent
    }

    pub fn remaining(&self) -> f64 {
        self.total - self.spent
    }

    pub fn exhausted(&self) -> bool {
        self.remaining() <= 0.0
    }

    pub fn charges(&self) -> &[f64] {
        &self.charges
    }
}

/// Smallest epoch `t ∈ [1, t_max]` with `μ(t_max) − μ(t) ≤ ε`, by binary
/// search. Assumes `mean` is non-decreasing.
pub fn conservative_stopping(mut mean: impl FnMut(u32) -> Result<f64>, t_max: u32, epsilon: f64) -> Result<u32> {
    if t_max == 0 {
        return Err(Error::ParameterDomain("t_max must be positive".into()));
    }
    if !(epsilon > 0.0) {
        return Err(Error::ParameterDomain(format!("epsilon must be positive, got {epsilon}")));
    }
    let top = mean(t_max)?;
    let (mut lo, mut hi) = (1, t_max);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if top - mean(mid)? <= epsilon {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(lo)
}

/// Conservative stop of configuration `x` under `model`.
pub fn conservative_stopping_for<S: Surrogate + ?Sized>(model: &S, x: &[f64], t_max: u32, epsilon: f64) -> Result<u32> {
    let along = model.along_epochs(x)?;
    conservative_stopping(|e| Ok(along(e as f64 / t_max as f64)?.mean), t_max, epsilon)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonEntry {
    pub x: Vec<f64>,
    pub t_opt: u32,
    /// Predicted incremental cost of training `x` to `t_opt`.
    pub predicted_cost: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Horizon {
    pub entries: Vec<HorizonEntry>,
    /// Planning budget left after all entries.
    pub remainder: f64,
}

/// A configuration proposed for the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub x: Vec<f64>,
    pub t_opt: u32,
    /// Smallest epoch that trains anything new.
    pub min_epoch: u32,
}

/// Builds a horizon from successive proposals.
///
/// Entries are appended while their predicted costs fit in `budget` and
/// fewer than `max_horizon` are planned. The first entry is always kept: if
/// it does not fit, its epoch is lowered to the largest affordable one, or to
/// `fallback_epoch` if none is affordable. `propose` returns `None` for a
/// slot it cannot fill.
pub fn assemble_horizon(
    budget: f64,
    max_horizon: usize,
    fallback_epoch: u32,
    mut propose: impl FnMut(&[HorizonEntry]) -> Result<Option<Proposal>>,
    mut cost: impl FnMut(&[f64], u32) -> f64,
) -> Result<Horizon> {
    let mut h = Horizon { entries: Vec::new(), remainder: budget };
    for _ in 0..max_horizon {
        let Some(p) = propose(&h.entries)? else { continue };
        let t_opt = p.t_opt.max(p.min_epoch);
        let c = cost(&p.x, t_opt);
        if h.entries.is_empty() {
            let (t, c) = if c <= h.remainder {
                (t_opt, c)
            } else {
                let affordable = (p.min_epoch..t_opt).rev().map(|t| (t, cost(&p.x, t))).find(|(_, c)| *c <= h.remainder);
                affordable.unwrap_or_else(|| {
                    let t = fallback_epoch.min(t_opt).max(p.min_epoch);
                    (t, cost(&p.x, t))
                })
            };
            h.remainder -= c;
            h.entries.push(HorizonEntry { x: p.x, t_opt: t, predicted_cost: c });
        } else if c <= h.remainder {
            h.remainder -= c;
            h.entries.push(HorizonEntry { x: p.x, t_opt, predicted_cost: c });
        } else {
            break;
        }
    }
    Ok(h)
}

/// Index of the entry maximizing `ei / max(cost, 1e-6 · total_budget)`.
/// Ties go to the larger EI, then the lexicographically smaller config.
pub fn select_query(entries: &[HorizonEntry], eis: &[f64], total_budget: f64) -> Result<usize> {
    if entries.is_empty() || entries.len() != eis.len() {
        return Err(Error::ParameterDomain("select_query needs one EI per non-empty horizon entry".into()));
    }
    let floor = 1e-6 * total_budget;
    let ratio = |i: usize| eis[i] / entries[i].predicted_cost.max(floor).max(f64::MIN_POSITIVE);
    let mut best = 0;
    for i in 1..entries.len() {
        let (ri, rb) = (ratio(i), ratio(best));
        let better = ri > rb
            || (ri == rb && (eis[i] > eis[best] || (eis[i] == eis[best] && lex_cmp(&entries[i].x, &entries[best].x).is_lt())));
        if better {
            best = i;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BapiConfig {
    pub budget: f64,
    pub epsilon: f64,
    pub tau: f64,
    /// Checkpoint block as a fraction of `t_max`.
    pub block_fraction: f64,
    pub max_horizon: usize,
    pub n_init: usize,
    pub seed: u64,
    /// Monte-Carlo samples for batch EI while planning.
    pub n_mc: usize,
    /// Truncated-normal samples of the monotone model.
    pub constraint_samples: usize,
    /// Hyperparameters are re-optimized after this many evaluations.
    pub refit_every: usize,
    pub fit_restarts: usize,
    pub fit_max_iter: usize,
}

impl Default for BapiConfig {
    fn default() -> Self {
        BapiConfig {
            budget: 100.0,
            epsilon: 0.01,
            tau: 2.0,
            block_fraction: 0.2,
            max_horizon: 4,
            n_init: 5,
            seed: 0,
            n_mc: 128,
            constraint_samples: 200,
            refit_every: 5,
            fit_restarts: 2,
            fit_max_iter: 40,
        }
    }
}

impl BapiConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ParameterDomain(m));
        if !(self.budget.is_finite() && self.budget >= 0.0) {
            return bad(format!("budget must be nonnegative, got {}", self.budget));
        }
        if !(self.epsilon > 0.0) || !(self.tau >= 0.0) {
            return bad("epsilon must be positive and tau nonnegative".into());
        }
        if !(self.block_fraction > 0.0 && self.block_fraction <= 1.0) {
            return bad(format!("block fraction must lie in (0, 1], got {}", self.block_fraction));
        }
        if self.max_horizon == 0 || self.refit_every == 0 {
            return bad("max_horizon and refit_every must be at least 1".into());
        }
        if self.n_mc < crate::acquisition::MIN_MC_SAMPLES {
            return bad(format!("n_mc must be at least {}", crate::acquisition::MIN_MC_SAMPLES));
        }
        Ok(())
    }

    pub fn eval_settings(&self) -> EvalSettings {
        EvalSettings {
            block_fraction: self.block_fraction,
            tau: self.tau,
            epsilon: self.epsilon,
        }
    }
}

/// Best point found: configuration, epoch and value.
#[derive(Debug, Clone, PartialEq)]
pub struct Incumbent {
    pub x: Vec<f64>,
    pub epoch: u32,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub trace: Trace,
    pub incumbent: Option<Incumbent>,
    pub ledger: BudgetLedger,
    /// Set when a backend failure aborted the run.
    pub failure: Option<String>,
}

/// Candidate configurations for the next query.
pub fn candidate_domain<B: Backend + ?Sized>(backend: &B, restart: &RestartState) -> CandidateDomain {
    match backend.candidates() {
        Some(all) => CandidateDomain::Discrete(
            all.into_iter()
                .filter(|c| restart.paid(c) < backend.t_max())
                .collect(),
        ),
        None => CandidateDomain::Continuous { dim: backend.dim() },
    }
}

/// Initial configurations: a scrambled Halton design, or a seeded sample of
/// a finite candidate set.
pub fn initial_design<B: Backend + ?Sized>(backend: &B, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    use rand::seq::SliceRandom;
    match backend.candidates() {
        Some(mut all) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            all.shuffle(&mut rng);
            all.truncate(n);
            Ok(all)
        }
        None => scrambled_halton(n, backend.dim(), seed),
    }
}

/// Observations, models and bookkeeping shared by the optimizers.
#[derive(Debug, Clone)]
pub struct OptState {
    /// Curve points selected into the models.
    pub archive: Vec<CurveObservation>,
    pub restart: RestartState,
    pub ledger: BudgetLedger,
    pub trace: Trace,
    pub iteration: usize,
    pub t_max: u32,
}

impl OptState {
    pub fn new(budget: f64, t_max: u32) -> Result<Self> {
        Ok(OptState {
            archive: Vec::new(),
            restart: RestartState::new(),
            ledger: BudgetLedger::new(budget)?,
            trace: Trace::default(),
            iteration: 0,
            t_max,
        })
    }

    pub fn incumbent(&self) -> Option<Incumbent> {
        self.archive
            .iter()
            .max_by(|a, b| a.value.total_cmp(&b.value).then_with(|| lex_cmp(&b.x, &a.x)))
            .map(|o| Incumbent { x: o.x.clone(), epoch: o.epoch, value: o.value })
    }

    pub fn y_best(&self) -> f64 {
        self.incumbent().map_or(f64::NEG_INFINITY, |i| i.value)
    }

    pub fn dataset(&self, noise_var: f64) -> Result<Dataset> {
        Dataset::new(
            self.archive.iter().map(|o| o.query(self.t_max)).collect(),
            self.archive.iter().map(|o| o.value).collect(),
            noise_var,
        )
    }

    pub fn cost_records(&self) -> Vec<CostRecord> {
        self.archive
            .iter()
            .map(|o| CostRecord { x: o.x.clone(), epoch: o.epoch, cost: o.cumulative_cost })
            .collect()
    }

    /// Books an evaluation: charges the ledger, marks the paid epochs,
    /// archives `selected` and appends a trace row.
    pub fn record(&mut self, outcome: &EvalOutcome, selected: Vec<CurveObservation>, event: TraceEvent) -> Result<()> {
        self.ledger.charge(outcome.charged)?;
        self.restart.record(&outcome.x, outcome.last_epoch());
        self.archive.extend(selected);
        let value = outcome.curve.last().map_or(f64::NAN, |o| o.value);
        let incumbent_value = self.y_best();
        self.trace.push(TraceRow {
            iteration: self.iteration,
            event,
            config: outcome.x.clone(),
            epochs_trained: outcome.last_epoch(),
            actual_cost: outcome.charged,
            cumulative_cost: self.ledger.spent(),
            value,
            incumbent_value,
        });
        self.iteration += 1;
        Ok(())
    }

    /// Retags the final row when the budget ran out.
    pub fn finish(&mut self) {
        if self.ledger.exhausted() {
            if let Some(r) = self.trace.rows.last_mut() {
                r.event = TraceEvent::BudgetStop;
            }
        }
    }

    pub fn into_result(mut self, failure: Option<String>) -> RunResult {
        self.finish();
        RunResult {
            incumbent: self.incumbent(),
            trace: self.trace,
            ledger: self.ledger,
            failure,
        }
    }
}

/// Trains the initial design to one checkpoint block each.
pub fn run_initial_design<B: Backend + ?Sized>(
    backend: &B,
    state: &mut OptState,
    n_init: usize,
    block_fraction: f64,
    seed: u64,
) -> Result<Option<String>> {
    let t_max = backend.t_max();
    let t0 = block_size(block_fraction, t_max);
    let prior = prior_model(backend.dim())?;
    for x in initial_design(backend, n_init, seed)? {
        if state.ledger.exhausted() {
            break;
        }
        let out = train_plain(backend, &x, t0, 0, state.ledger.remaining(), block_fraction)?;
        if out.curve.is_empty() {
            return Ok(out.error);
        }
        let model = fit_free_model(&prior, state)?;
        let selected = select_curve_points(&model, &out.curve, t_max)?;
        state.record(&out, selected, TraceEvent::Init)?;
        if out.stop == StopReason::Failed {
            return Ok(out.error);
        }
    }
    Ok(None)
}

/// Default objective kernel: ARD RBF over configurations times an
/// exponential-decay kernel over epochs.
pub fn objective_kernel(dim: usize) -> KernelSpec {
    KernelSpec::product(dim, 0.3, TimeKernel::ExpDecay { alpha: 1.0, beta: 1.0, w: 0.1 })
}

fn prior_model(dim: usize) -> Result<GpModel> {
    GpModel::new(objective_kernel(dim), Dataset::empty(1e-4), Scaling::Standardize)
}

/// `template`'s hyperparameters conditioned on the archive.
fn fit_free_model(template: &GpModel, state: &OptState) -> Result<GpModel> {
    template.with_data(state.dataset(template.noise_var())?)
}

/// Objective and cost models, refit on a fixed cadence.
pub struct Models {
    pub objective: GpModel,
    pub cost: CostModel,
    since_fit: usize,
    refit_every: usize,
    opts: FitOptions,
}

impl Models {
    pub fn new(state: &OptState, dim: usize, refit_every: usize, opts: FitOptions) -> Result<Self> {
        let mut m = Models {
            objective: fit_free_model(&prior_model(dim)?, state)?,
            cost: CostModel::new(CostModel::default_kernel(dim), 1e-4, &state.cost_records(), state.t_max)?,
            since_fit: 0,
            refit_every,
            opts,
        };
        m.refit(state, true)?;
        Ok(m)
    }

    /// Conditions on the current archive; re-optimizes hyperparameters when
    /// `force` is set or the cadence is due.
    pub fn refit(&mut self, state: &OptState, force: bool) -> Result<()> {
        let data = state.dataset(self.objective.noise_var())?;
        let records = state.cost_records();
        let due = force || self.since_fit + 1 >= self.refit_every;
        self.objective = self.objective.with_data(data)?;
        if due && self.objective.data().len() >= 2 {
            let opts = FitOptions { seed: self.opts.seed ^ state.iteration as u64, ..self.opts };
            let bounds = HyperBounds::default_for(self.objective.kernel());
            self.objective = fit_hyperparams(&self.objective, &bounds, opts)?.model;
            self.cost = CostModel::fit(&records, state_dim(&records), state.t_max, Some(&self.cost), opts)?;
            self.since_fit = 0;
        } else {
            self.cost = self.cost.refresh(&records)?;
            self.since_fit += 1;
        }
        Ok(())
    }
}

fn state_dim(records: &[CostRecord]) -> usize {
    records.first().map_or(0, |r| r.x.len())
}

/// Plans a horizon under `model`: greedy batch EI at `t_max` proposes each
/// configuration, whose conservative stop and restart-aware predicted cost
/// are then charged against the planning budget.
#[allow(clippy::too_many_arguments)]
pub fn build_horizon<S: Surrogate + ?Sized>(
    model: &S,
    cost: &CostModel,
    restart: &RestartState,
    domain: &CandidateDomain,
    y_best: f64,
    budget_remaining: f64,
    cfg: &BapiConfig,
    t_max: u32,
    seed: u64,
) -> Result<Horizon> {
    let mut batch = FantasyBatch::new(y_best, cfg.n_mc, cfg.max_horizon, seed)?;
    let acq = AcqOptions { seed: seed ^ 0xa5a5, ..AcqOptions::default() };
    let fallback = block_size(cfg.block_fraction, t_max);
    assemble_horizon(
        budget_remaining,
        cfg.max_horizon,
        fallback,
        |_| {
            // Fully trained configurations have nothing left to offer.
            let q = greedy_append_where(model, &batch, domain, 1.0, &acq, |x| restart.paid(x) < t_max)?;
            batch.push(q.clone())?;
            let paid = restart.paid(&q.x);
            if paid >= t_max {
                return Ok(None);
            }
            let t_opt = conservative_stopping_for(model, &q.x, t_max, cfg.epsilon)?;
            Ok(Some(Proposal { x: q.x, t_opt, min_epoch: paid + 1 }))
        },
        |x, t| cost.incremental_cost(restart, x, t),
    )
}

/// Runs the budget-aware optimizer on `backend` until the budget is spent
/// or nothing affordable is left.
pub fn bapi_run<B: Backend + ?Sized>(backend: &B, cfg: &BapiConfig) -> Result<RunResult> {
    cfg.validate()?;
    let t_max = backend.t_max();
    let dim = backend.dim();
    let mut seeds = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = OptState::new(cfg.budget, t_max)?;

    if let Some(err) = run_initial_design(backend, &mut state, cfg.n_init, cfg.block_fraction, seeds.next_u64())? {
        return Ok(state.into_result(Some(err)));
    }
    if state.archive.is_empty() {
        return Ok(state.into_result(None));
    }
    let fit_opts = FitOptions {
        restarts: cfg.fit_restarts,
        max_iter: cfg.fit_max_iter,
        seed: seeds.next_u64(),
    };
    let mut models = Models::new(&state, dim, cfg.refit_every, fit_opts)?;
    let settings = cfg.eval_settings();
    let mono = MonotoneSettings {
        n_samples: cfg.constraint_samples,
        seed: seeds.next_u64(),
        ..MonotoneSettings::default()
    };

    while !state.ledger.exhausted() {
        let objective = MonotoneGp::new(models.objective.clone(), mono)?;
        let domain = candidate_domain(backend, &state.restart);
        if matches!(&domain, CandidateDomain::Discrete(c) if c.is_empty()) {
            break;
        }
        let y_best = state.y_best();
        let horizon = build_horizon(
            &objective,
            &models.cost,
            &state.restart,
            &domain,
            y_best,
            state.ledger.remaining(),
            cfg,
            t_max,
            seeds.next_u64(),
        )?;
        if horizon.entries.is_empty() {
            info!("no affordable query left with {} budget remaining", state.ledger.remaining());
            break;
        }
        let eis = horizon
            .entries
            .iter()
            .map(|e| ei(&objective, &Query::at_epoch(&e.x, e.t_opt, t_max), y_best))
            .collect::<Result<Vec<_>>>()?;
        let pick = &horizon.entries[select_query(&horizon.entries, &eis, cfg.budget)?];

        let ctx = EvalContext {
            model: &objective,
            y_best,
            paid_epoch: state.restart.paid(&pick.x),
            budget_remaining: state.ledger.remaining(),
        };
        let out = evaluate(backend, &pick.x, pick.t_opt, &ctx, &settings)?;
        if out.curve.is_empty() {
            return Ok(state.into_result(out.error));
        }
        let selected = select_curve_points(&objective, &out.curve, t_max)?;
        let event = match out.stop {
            StopReason::EarlyTerminated => TraceEvent::EarlyStop,
            _ => TraceEvent::Evaluate,
        };
        state.record(&out, selected, event)?;
        info!(
            "iter {} x={:?} t_opt={} predicted={:.4} actual={:.4} y={:.4} y_best={:.4} B_r={:.4}",
            state.iteration,
            pick.x,
            pick.t_opt,
            pick.predicted_cost,
            out.charged,
            out.curve.last().map_or(f64::NAN, |o| o.value),
            state.y_best(),
            state.ledger.remaining()
        );
        if out.stop == StopReason::Failed {
            return Ok(state.into_result(out.error));
        }
        models.refit(&state, false)?;
    }
    Ok(state.into_result(None))
}
