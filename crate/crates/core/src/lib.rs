//! Budget-aware, non-myopic Bayesian optimization for iterative learners.

// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acquisition;
pub mod baselines;
pub mod cost;
pub mod design;
pub mod error;
pub mod evaluator;
pub mod gp;
pub mod kernels;
pub mod learners;
pub mod linalg;
pub mod monotonic;
pub mod optim;
pub mod planner;
pub mod surrogate;
pub mod trace;
pub mod truncnorm;
pub mod types;

pub use baselines::{run_method, Method};
pub use error::{Error, Result};
pub use learners::{Backend, CurveTable, SyntheticProblem, SyntheticSpec};
pub use planner::{bapi_run, BapiConfig, RunResult};
pub use trace::{Trace, TraceEvent, TraceRow};
pub use types::{CurveObservation, Query};
