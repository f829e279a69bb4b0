//! Fixtures shared by the benchmarks.

use bapi_core::gp::{Dataset, GpModel, Scaling};
use bapi_core::planner::objective_kernel;
use bapi_core::{Query, Result, SyntheticProblem, SyntheticSpec};

/// A model conditioned on `n_configs` learning curves of `points` epochs each
/// from the default synthetic landscape.
pub fn fitted_model(n_configs: usize, points: usize) -> Result<GpModel> {
    let spec = SyntheticSpec::default();
    let problem = SyntheticProblem::new(&spec)?;
    let t_max = spec.t_max;
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for i in 0..n_configs {
        let x: Vec<f64> = (0..spec.dim).map(|d| ((i * 7 + d * 3) % 11) as f64 / 10.0).collect();
        for k in 1..=points {
            let epoch = (k as u32 * t_max / points as u32).max(1);
            inputs.push(Query::new(x.clone(), epoch as f64 / t_max as f64));
            targets.push(problem.clean_value(&x, epoch));
        }
    }
    GpModel::new(objective_kernel(spec.dim), Dataset::new(inputs, targets, 1e-4)?, Scaling::Standardize)
}
