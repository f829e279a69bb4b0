//! Problem backends: things that can be trained on a configuration for a
//! number of epochs and report a validation value and the cumulative cost.

mod synthetic;
mod table;

pub use synthetic::{CurveFamily, Smooth, SyntheticProblem, SyntheticSpec};
pub use table::{CurveTable, TableConfig, TableMeta};

use crate::error::Result;

/// An iterative learner over the unit cube of configurations.
///
/// Implementations must be deterministic: the same `(x, epoch)` always
/// yields the same value and cumulative cost, whatever was evaluated before.
pub trait Backend: Sync {
    fn dim(&self) -> usize;

    fn t_max(&self) -> u32;

    /// Value and cumulative training cost of `x` trained from scratch to `epoch`.
    fn evaluate(&self, x: &[f64], epoch: u32) -> Result<(f64, f64)>;

    /// Finite candidate set, for tabular backends.
    fn candidates(&self) -> Option<Vec<Vec<f64>>> {
        None
    }
}

impl<B: Backend + ?Sized> Backend for &B {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn t_max(&self) -> u32 {
        (**self).t_max()
    }

    fn evaluate(&self, x: &[f64], epoch: u32) -> Result<(f64, f64)> {
        (**self).evaluate(x, epoch)
    }

    fn candidates(&self) -> Option<Vec<Vec<f64>>> {
        (**self).candidates()
    }
}
