use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CubvError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CubvError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("stratification infeasible: class {class} has {count} members but K = {folds}")]
    StratificationInfeasible { class: u8, count: usize, folds: usize },

    #[error("complexity limit exceeded: {0}")]
    ComplexityLimit(String),

    #[error("infinite number of Monte Carlo trials required (p = 0)")]
    InfiniteTrials,

    #[error("ingestion failed: {0}")]
    Ingestion(String),

    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl CubvError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        CubvError::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CubvError::Io {
            path: path.into(),
            source,
        }
    }
}
