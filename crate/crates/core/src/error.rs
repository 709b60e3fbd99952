use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("{0}")]
    InvalidInput(String),

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("too many malformed lines in {path}: {bad} of {total} exceed the {threshold} tolerance")]
    TooManyMalformed {
        path: PathBuf,
        bad: u64,
        total: u64,
        threshold: f64,
    },

    #[error("rank-deficient design matrix; dependent columns: {}", .0.join(", "))]
    RankDeficient(Vec<String>),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
