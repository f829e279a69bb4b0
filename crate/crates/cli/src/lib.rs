//! Benchmark harness: run configurations, trace aggregation and plotting.

pub mod aggregate;
pub mod config;
pub mod experiment;
pub mod plot;

pub use config::RunConfig;
pub use experiment::{run_experiment, ExperimentSummary};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub(crate) fn runtime(e: impl std::fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }

    /// Process exit code: 1 for configuration problems, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Parse(_) | CliError::Runtime(_) => 2,
        }
    }
}
