//! Training-cost model and restart-aware charging.
//!
//! Cumulative cost is modeled by a GP with an RBF kernel over the
//! configuration times a linear kernel (with bias) over the normalized epoch,
//! so predicted cost grows linearly in `t` at a rate that varies with `x`.
//! Targets are only divided by their maximum, never centered.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{fit_hyperparams, Dataset, FitOptions, GpModel, HyperBounds, Scaling, NOISE_FLOOR};
use crate::kernels::{KernelSpec, TimeKernel};
use crate::types::{same_config, Query};

/// Floor on predicted cumulative cost.
pub const COST_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRecord {
    pub x: Vec<f64>,
    pub epoch: u32,
    pub cost: f64,
}

/// Largest epoch already paid for, per configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RestartState {
    paid: Vec<(Vec<f64>, u32)>,
}

impl RestartState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn paid(&self, x: &[f64]) -> u32 {
        self.paid
            .iter()
            .find(|(c, _)| same_config(c, x))
            .map_or(0, |(_, t)| *t)
    }

    /// Records that `x` has been trained through `epoch`. Never lowers the mark.
    pub fn record(&mut self, x: &[f64], epoch: u32) {
        match self.paid.iter_mut().find(|(c, _)| same_config(c, x)) {
            Some((_, t)) => *t = (*t).max(epoch),
            None => self.paid.push((x.to_vec(), epoch)),
        }
    }

    pub fn configs(&self) -> impl Iterator<Item = (&[f64], u32)> {
        self.paid.iter().map(|(c, t)| (c.as_slice(), *t))
    }
}

#[derive(Debug, Clone)]
pub struct CostModel {
    gp: GpModel,
    t_max: u32,
}

impl CostModel {
    pub fn default_kernel(dim: usize) -> KernelSpec {
        KernelSpec::product(
            dim,
            0.5,
            TimeKernel::Linear {
                bias_var: 0.1,
                slope_var: 1.0,
            },
        )
    }

    fn dataset(records: &[CostRecord], t_max: u32, noise: f64) -> Result<Dataset> {
        if let Some(r) = records.iter().find(|r| !(r.cost >= 0.0)) {
            return Err(Error::ParameterDomain(format!("negative cost {}", r.cost)));
        }
        Dataset::new(
            records.iter().map(|r| Query::at_epoch(&r.x, r.epoch, t_max)).collect(),
            records.iter().map(|r| r.cost).collect(),
            noise,
        )
    }

    /// Conditions `kernel` on `records` without refitting hyperparameters.
    pub fn new(kernel: KernelSpec, noise_var: f64, records: &[CostRecord], t_max: u32) -> Result<Self> {
        let gp = GpModel::new(kernel, Self::dataset(records, t_max, noise_var)?, Scaling::MaxAbs)?;
        Ok(CostModel { gp, t_max })
    }

    /// Fits hyperparameters on `records`, starting from `start` (or the default kernel).
    pub fn fit(records: &[CostRecord], dim: usize, t_max: u32, start: Option<&CostModel>, opts: FitOptions) -> Result<Self> {
        let (kernel, noise) = match start {
            Some(m) => (m.gp.kernel().clone(), m.gp.noise_var()),
            None => (Self::default_kernel(dim), 1e-4),
        };
        let model = Self::new(kernel, noise.max(NOISE_FLOOR), records, t_max)?;
        if records.len() < 2 {
            return Ok(model);
        }
        let report = fit_hyperparams(&model.gp, &HyperBounds::default_for(model.gp.kernel()), opts)?;
        Ok(CostModel {
            gp: report.model,
            t_max,
        })
    }

    /// Same hyperparameters, new records.
    pub fn refresh(&self, records: &[CostRecord]) -> Result<Self> {
        Self::new(self.gp.kernel().clone(), self.gp.noise_var(), records, self.t_max)
    }

    pub fn gp(&self) -> &GpModel {
        &self.gp
    }

    pub fn t_max(&self) -> u32 {
        self.t_max
    }

    /// Posterior `(mean, variance)` of cumulative cost at normalized epoch `t`.
    pub fn predict_at(&self, x: &[f64], t: f64) -> (f64, f64) {
        let p = self.gp.posterior(&Query::new(x.to_vec(), t));
        (p.mean.max(COST_FLOOR), p.variance)
    }

    pub fn predict_cost(&self, x: &[f64], epoch: u32) -> (f64, f64) {
        self.predict_at(x, epoch as f64 / self.t_max as f64)
    }

    /// Predicted charge for training `x` through `epoch` given what is
    /// already paid: `max(0, μ_c(x, t) − μ_c(x, t_paid))`, or the full
    /// predicted cost for a fresh configuration.
    pub fn incremental_cost(&self, restart: &RestartState, x: &[f64], epoch: u32) -> f64 {
        incremental_charge(restart.paid(x), |t| self.predict_cost(x, t).0, epoch)
    }

    /// Fitted slope variance of the linear epoch factor, if any.
    pub fn slope_var(&self) -> Option<f64> {
        match self.gp.kernel().time_kernel() {
            Some(TimeKernel::Linear { slope_var, .. }) => Some(*slope_var),
            _ => None,
        }
    }
}

/// `max(0, cost(epoch) − cost(paid))`, with `paid == 0` meaning nothing paid.
pub fn incremental_charge(paid: u32, cost: impl Fn(u32) -> f64, epoch: u32) -> f64 {
    if paid == 0 {
        cost(epoch)
    } else if epoch <= paid {
        0.0
    } else {
        (cost(epoch) - cost(paid)).max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_records(x: &[f64], slope: f64, t_max: u32) -> Vec<CostRecord> {
        (1..=t_max)
            .map(|e| CostRecord {
                x: x.to_vec(),
                epoch: e,
                cost: slope * e as f64 / t_max as f64,
            })
            .collect()
    }

    #[test]
    fn recovers_linear_cost() {
        let recs = linear_records(&[0.5], 2.0, 10);
        let m = CostModel::fit(&recs, 1, 10, None, FitOptions::default()).unwrap();
        let (mean, _) = m.predict_at(&[0.5], 0.55);
        assert!((mean - 1.1).abs() / 1.1 < 0.05, "mean {mean}");
        let (mean, _) = m.predict_at(&[0.5], 0.5);
        assert!((mean - 1.0).abs() / 1.0 < 0.05, "mean {mean}");
    }

    #[test]
    fn interpolates_observed_cost() {
        let recs = linear_records(&[0.5], 2.0, 10);
        let m = CostModel::new(CostModel::default_kernel(1), 0.0, &recs, 10).unwrap();
        let (mean, _) = m.predict_cost(&[0.5], 7);
        assert!((mean - 1.4).abs() < 1e-6, "mean {mean}");
    }

    #[test]
    fn slopes_keep_their_order() {
        let mut recs: Vec<CostRecord> = linear_records(&[0.2], 1.0, 10).into_iter().step_by(2).collect();
        recs.extend(linear_records(&[0.8], 3.0, 10).into_iter().step_by(2));
        let m = CostModel::fit(&recs, 1, 10, None, FitOptions::default()).unwrap();
        for e in [2, 4, 6, 8, 10] {
            assert!(m.predict_cost(&[0.2], e).0 < m.predict_cost(&[0.8], e).0);
        }
        assert!(m.slope_var().unwrap() >= 0.0);
        for e in 1..10 {
            assert!(m.predict_cost(&[0.8], e + 1).0 >= m.predict_cost(&[0.8], e).0);
        }
    }

    #[test]
    fn incremental_rules() {
        assert_eq!(incremental_charge(0, |_| 10.0, 5), 10.0);
        let c = |t: u32| if t == 10 { 4.0 } else { 10.0 };
        assert_eq!(incremental_charge(10, c, 25), 6.0);
        let c = |t: u32| if t == 10 { 4.0 } else { 3.0 };
        assert_eq!(incremental_charge(10, c, 25), 0.0);
        assert_eq!(incremental_charge(10, |_| 1.0, 8), 0.0);
    }

    #[test]
    fn restart_state_tracks_max_epoch() {
        let mut r = RestartState::new();
        assert_eq!(r.paid(&[0.1, 0.2]), 0);
        r.record(&[0.1, 0.2], 10);
        r.record(&[0.1 + 1e-12, 0.2], 4);
        assert_eq!(r.paid(&[0.1, 0.2]), 10);
        r.record(&[0.1, 0.2], 15);
        assert_eq!(r.paid(&[0.1, 0.2]), 15);
        assert_eq!(r.paid(&[0.1, 0.3]), 0);
    }

    #[test]
    fn negative_cost_rejected() {
        let recs = vec![CostRecord { x: vec![0.1], epoch: 1, cost: -1.0 }];
        assert!(CostModel::new(CostModel::default_kernel(1), 1e-4, &recs, 10).is_err());
    }
}
