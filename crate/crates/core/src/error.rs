use std::path::PathBuf;

use chrono::NaiveDate;
use thiserror::Error;

/// Errors produced anywhere in the forecasting pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("no records for station {station} class {class}")]
    EmptySelection { station: u32, class: String },

    #[error("duplicate record for station {station} on {date}")]
    Duplicate { station: u32, date: NaiveDate },

    #[error("out of range: {0}")]
    Range(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: expected width {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("training failed: {0}")]
    Training(String),

    #[error("data leakage: {0}")]
    Leakage(String),

    #[error("model format: {0}")]
    Format(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
