use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("no distinct endpoints: the law has a single atom")]
    NoDistinctEndpoints,

    #[error("ratio undefined, no upper hits yet")]
    RatioUndefined,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("stream too short: need {need} observations, got {got}")]
    StreamTooShort { need: u64, got: u64 },

    #[error("enumeration budget exceeded: {0}")]
    BudgetExceeded(String),

    /// Invalid experiment configuration, detected before any work is done.
    #[error("config error: {0}")]
    Config(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("runtime error: {0}")]
    Runtime(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
