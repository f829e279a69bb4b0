//! Reference optimizers sharing the ledger and trace contracts of the main
//! loop: random search, myopic EI at `t_max`, and EI per unit cost over
//! `(x, t)`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{best_observed_config, expected_improvement, maximize_over_domain, AcqOptions, CandidateDomain};
use crate::error::{Error, Result};
use crate::evaluator::{select_curve_points, train_plain, StopReason};
use crate::gp::FitOptions;
use crate::learners::Backend;
use crate::planner::{bapi_run, candidate_domain, run_initial_design, BapiConfig, Models, OptState, RunResult};
use crate::trace::TraceEvent;
use crate::types::Query;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Bapi,
    EiTmax,
    EiPerCost,
    Random,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Bapi, Method::EiTmax, Method::EiPerCost, Method::Random];

    pub fn name(self) -> &'static str {
        match self {
            Method::Bapi => "bapi",
            Method::EiTmax => "ei_tmax",
            Method::EiPerCost => "ei_per_cost",
            Method::Random => "random",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown method {s:?}")))
    }
}

/// Runs `method` on `backend`. Baselines use the budget, seed, design size,
/// block size and fitting settings of `cfg`.
pub fn run_method<B: Backend + ?Sized>(method: Method, backend: &B, cfg: &BapiConfig) -> Result<RunResult> {
    match method {
        Method::Bapi => bapi_run(backend, cfg),
        Method::Random => random_run(backend, cfg),
        Method::EiTmax => ei_tmax_run(backend, cfg),
        Method::EiPerCost => ei_per_cost_run(backend, cfg),
    }
}

/// Uniformly random configurations trained to `t_max` until the budget is spent.
pub fn random_run<B: Backend + ?Sized>(backend: &B, cfg: &BapiConfig) -> Result<RunResult> {
    cfg.validate()?;
    let t_max = backend.t_max();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = OptState::new(cfg.budget, t_max)?;
    while !state.ledger.exhausted() {
        let x = match candidate_domain(backend, &state.restart) {
            CandidateDomain::Discrete(c) if c.is_empty() => break,
            CandidateDomain::Discrete(c) => c[rng.random_range(0..c.len())].clone(),
            CandidateDomain::Continuous { dim } => (0..dim).map(|_| rng.random::<f64>()).collect(),
        };
        let paid = state.restart.paid(&x);
        let out = train_plain(backend, &x, t_max, paid, state.ledger.remaining(), cfg.block_fraction)?;
        let Some(last) = out.curve.last().cloned() else {
            return Ok(state.into_result(out.error));
        };
        state.record(&out, vec![last], TraceEvent::Evaluate)?;
        if out.stop == StopReason::Failed {
            return Ok(state.into_result(out.error));
        }
    }
    Ok(state.into_result(None))
}

/// Shared loop of the model-based baselines: `choose` returns the next
/// configuration and the epoch to train it to.
fn model_loop<B, F>(backend: &B, cfg: &BapiConfig, mut choose: F) -> Result<RunResult>
where
    B: Backend + ?Sized,
    F: FnMut(&Models, &OptState, &CandidateDomain, u64) -> Result<Option<(Vec<f64>, u32)>>,
{
    cfg.validate()?;
    let t_max = backend.t_max();
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
    let mut models = Models::new(&state, backend.dim(), cfg.refit_every, fit_opts)?;
    while !state.ledger.exhausted() {
        let domain = candidate_domain(backend, &state.restart);
        if matches!(&domain, CandidateDomain::Discrete(c) if c.is_empty()) {
            break;
        }
        let Some((x, epoch)) = choose(&models, &state, &domain, seeds.next_u64())? else {
            break;
        };
        let paid = state.restart.paid(&x);
        let out = train_plain(backend, &x, epoch, paid, state.ledger.remaining(), cfg.block_fraction)?;
        if out.curve.is_empty() {
            return Ok(state.into_result(out.error));
        }
        let selected = select_curve_points(&models.objective, &out.curve, t_max)?;
        state.record(&out, selected, TraceEvent::Evaluate)?;
        if out.stop == StopReason::Failed {
            return Ok(state.into_result(out.error));
        }
        models.refit(&state, false)?;
    }
    Ok(state.into_result(None))
}

/// A uniformly random configuration not yet trained to `t_max`.
fn fresh_fallback(state: &OptState, domain: &CandidateDomain, seed: u64) -> Option<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match domain {
        CandidateDomain::Discrete(c) => c.first().cloned(),
        CandidateDomain::Continuous { dim } => loop {
            let x: Vec<f64> = (0..*dim).map(|_| rng.random::<f64>()).collect();
            if state.restart.paid(&x) < state.t_max {
                return Some(x);
            }
        },
    }
}

/// Myopic EI of the unconstrained model at `t_max`; every pick trains to `t_max`.
pub fn ei_tmax_run<B: Backend + ?Sized>(backend: &B, cfg: &BapiConfig) -> Result<RunResult> {
    let t_max = backend.t_max();
    model_loop(backend, cfg, |models, state, domain, seed| {
        let gp = &models.objective;
        let y_best = state.y_best();
        let score = |x: &[f64]| {
            if state.restart.paid(x) >= t_max {
                return f64::NEG_INFINITY;
            }
            let p = gp.posterior(&Query::new(x.to_vec(), 1.0));
            expected_improvement(p.mean, p.std_dev(), y_best)
        };
        let anchor = best_observed_config(gp);
        let opts = AcqOptions { seed, ..AcqOptions::default() };
        let (x, v) = maximize_over_domain(domain, anchor.as_deref(), &opts, score)?;
        let x = if v.is_finite() { x } else { fresh_fallback(state, domain, seed).expect("candidate exists") };
        Ok(Some((x, t_max)))
    })
}

/// `EI(x, t) / μ_c(x, t)` maximized jointly over configuration and epoch.
pub fn ei_per_cost_run<B: Backend + ?Sized>(backend: &B, cfg: &BapiConfig) -> Result<RunResult> {
    let t_max = backend.t_max();
    let floor = 1e-6 * cfg.budget;
    let epoch_of = |u: f64| 1 + (u.clamp(0.0, 1.0) * (t_max - 1) as f64).round() as u32;
    model_loop(backend, cfg, |models, state, domain, seed| {
        let gp = &models.objective;
        let y_best = state.y_best();
        let score_at = |x: &[f64], epoch: u32| {
            if epoch <= state.restart.paid(x) {
                return f64::NEG_INFINITY;
            }
            let p = gp.posterior(&Query::at_epoch(x, epoch, t_max));
            let c = models.cost.incremental_cost(&state.restart, x, epoch).max(floor);
            expected_improvement(p.mean, p.std_dev(), y_best) / c
        };
        let (joint, lifted_anchor) = match domain {
            CandidateDomain::Continuous { dim } => (
                CandidateDomain::Continuous { dim: dim + 1 },
                best_observed_config(gp).map(|mut a| {
                    a.push(1.0);
                    a
                }),
            ),
            CandidateDomain::Discrete(configs) => {
                let mut pairs = Vec::new();
                for c in configs {
                    for e in state.restart.paid(c) + 1..=t_max {
                        let mut z = c.clone();
                        z.push((e - 1) as f64 / (t_max - 1).max(1) as f64);
                        pairs.push(z);
                    }
                }
                (CandidateDomain::Discrete(pairs), None)
            }
        };
        let opts = AcqOptions { seed, ..AcqOptions::default() };
        let (z, v) = maximize_over_domain(&joint, lifted_anchor.as_deref(), &opts, |z| {
            let (x, u) = z.split_at(z.len() - 1);
            score_at(x, epoch_of(u[0]))
        })?;
        if !v.is_finite() {
            let x = fresh_fallback(state, domain, seed).expect("candidate exists");
            let e = (state.restart.paid(&x) + 1).min(t_max);
            return Ok(Some((x, e)));
        }
        let (x, u) = z.split_at(z.len() - 1);
        Ok(Some((x.to_vec(), epoch_of(u[0]))))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{CurveFamily, Smooth, SyntheticProblem, SyntheticSpec};

    fn constant_cost_problem() -> SyntheticProblem {
        let base = SyntheticProblem::new(&SyntheticSpec { dim: 2, t_max: 10, ..Default::default() }).unwrap();
        SyntheticProblem {
            slope: Smooth::constant(1.0),
            overhead: Smooth::constant(0.5),
            family: CurveFamily::Exponential,
            ..base
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("nope".parse::<Method>().is_err());
    }

    #[test]
    fn random_spends_exactly_three_full_runs() {
        let p = constant_cost_problem();
        let cfg = BapiConfig { budget: 3.0 * 10.5, seed: 1, ..Default::default() };
        let r = random_run(&p, &cfg).unwrap();
        assert_eq!(r.trace.rows.len(), 3);
        assert!(r.trace.rows.iter().all(|row| row.epochs_trained == 10));
        assert_eq!(r.ledger.spent(), 31.5);
    }

    #[test]
    fn ei_tmax_always_trains_to_t_max() {
        let p = constant_cost_problem();
        let cfg = BapiConfig { budget: 8.0 * 10.5, seed: 2, ..Default::default() };
        let r = ei_tmax_run(&p, &cfg).unwrap();
        let evals: Vec<_> = r.trace.rows.iter().filter(|row| row.event != TraceEvent::Init).collect();
        assert!(!evals.is_empty());
        for row in &evals[..evals.len() - 1] {
            assert_eq!(row.epochs_trained, 10);
        }
    }

    #[test]
    fn ei_per_cost_runs_within_budget() {
        let p = constant_cost_problem();
        let cfg = BapiConfig { budget: 6.0 * 10.5, seed: 3, ..Default::default() };
        let r = ei_per_cost_run(&p, &cfg).unwrap();
        assert!(r.failure.is_none());
        assert!(r.ledger.spent() <= cfg.budget + 2.0 + 0.5);
        for w in r.trace.rows.windows(2) {
            assert!(w[1].incumbent_value >= w[0].incumbent_value);
        }
    }
}
