use thiserror::Error;

/// Errors produced by the analytic solvers, simulators and assignment routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unstable system: load {load} must be below capacity {capacity}")]
    Unstable { load: f64, capacity: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("infeasible assignment: {0}")]
    Infeasible(String),

    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn numeric(msg: impl Into<String>) -> Error {
    Error::Numeric(msg.into())
}
