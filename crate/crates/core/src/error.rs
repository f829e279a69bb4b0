use thiserror::Error;

/// Errors produced by the optimization engine and its backends.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter outside its domain: {0}")]
    ParameterDomain(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("ill-conditioned model: {0}")]
    IllConditioned(String),

    #[error("ill-conditioned constraint covariance: {0}")]
    IllConditionedConstraint(String),

    #[error("input outside the problem domain: {0}")]
    Domain(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("backend failure: {0}")]
    Backend(String),

    #[error("malformed data: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
