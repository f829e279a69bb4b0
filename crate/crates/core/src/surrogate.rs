use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::gp::{GpModel, PosteriorSummary};
use crate::monotonic::MonotoneGp;
use crate::types::Query;

/// Posterior predictions over joint `(x, t)` inputs, in target units.
pub trait Surrogate {
    fn predict(&self, z: &Query) -> Result<PosteriorSummary>;

    fn predict_joint(&self, zs: &[Query]) -> Result<(DVector<f64>, DMatrix<f64>)>;

    /// Marginal posterior along the epoch axis at a fixed configuration.
    fn along_epochs<'a>(&'a self, x: &[f64]) -> Result<Box<dyn Fn(f64) -> Result<PosteriorSummary> + 'a>>;

    /// Largest observed target, if any.
    fn best_observed(&self) -> Option<f64>;

    /// Underlying unconstrained model.
    fn gp(&self) -> &GpModel;
}

impl Surrogate for GpModel {
    fn predict(&self, z: &Query) -> Result<PosteriorSummary> {
        Ok(self.posterior(z))
    }

    fn predict_joint(&self, zs: &[Query]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        Ok(self.posterior_joint(zs))
    }

    fn along_epochs<'a>(&'a self, x: &[f64]) -> Result<Box<dyn Fn(f64) -> Result<PosteriorSummary> + 'a>> {
        let x = x.to_vec();
        Ok(Box::new(move |t| Ok(self.posterior(&Query::new(x.clone(), t)))))
    }

    fn best_observed(&self) -> Option<f64> {
        self.data().targets.iter().copied().reduce(f64::max)
    }

    fn gp(&self) -> &GpModel {
        self
    }
}

/// Virtual locations are placed at every distinct configuration in the
/// queried batch.
impl Surrogate for MonotoneGp {
    fn predict(&self, z: &Query) -> Result<PosteriorSummary> {
        self.system(&[&z.x])?.predict(z)
    }

    fn predict_joint(&self, zs: &[Query]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let configs: Vec<&[f64]> = zs.iter().map(|z| z.x.as_slice()).collect();
        self.system(&configs)?.predict_joint(zs)
    }

    fn along_epochs<'a>(&'a self, x: &[f64]) -> Result<Box<dyn Fn(f64) -> Result<PosteriorSummary> + 'a>> {
        let system = self.system(&[x])?;
        let x = x.to_vec();
        Ok(Box::new(move |t| system.predict(&Query::new(x.clone(), t))))
    }

    fn best_observed(&self) -> Option<f64> {
        self.base().best_observed()
    }

    fn gp(&self) -> &GpModel {
        self.base()
    }
}

/// A surrogate that can absorb extra observations while keeping its
/// hyperparameters and target scaling.
pub trait Conditionable: Surrogate + Sized {
    fn condition_on(&self, extra: &[(Query, f64)]) -> Result<Self>;
}

impl Conditionable for GpModel {
    fn condition_on(&self, extra: &[(Query, f64)]) -> Result<Self> {
        self.with_extra(extra)
    }
}

impl Conditionable for MonotoneGp {
    fn condition_on(&self, extra: &[(Query, f64)]) -> Result<Self> {
        MonotoneGp::new(self.base().with_extra(extra)?, self.settings())
    }
}
