use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid privacy budget: {0}")]
    InvalidBudget(String),

    #[error("invalid pattern query `{id}`: {reason}")]
    InvalidQuery { id: String, reason: String },

    #[error("invalid event stream: {0}")]
    InvalidStream(String),

    #[error("allocation for query `{query}` has {got} elements, pattern has {want}")]
    AllocationLength {
        query: String,
        got: usize,
        want: usize,
    },

    #[error("streams are not pattern-level neighbors: {0}")]
    NotNeighbors(String),

    #[error("no ground-truth instances of any target pattern (recall undefined)")]
    NoGroundTruth,

    #[error("relative quality loss undefined: baseline quality is zero")]
    ZeroBaselineQuality,

    #[error("baseline calibration failed: {0}")]
    Calibration(String),

    #[error("unknown query id `{0}` in pattern stream")]
    UnknownQuery(String),

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("invalid experiment plan: {0}")]
    InvalidPlan(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
