use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing required column `{0}`")]
    MissingColumn(String),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("dataset is empty{}", .0.as_deref().map(|d| format!(" ({d})")).unwrap_or_default())]
    EmptyDataset(Option<String>),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("cannot realize ratio {pos}:{neg} from {available_pos} positives and {available_neg} negatives")]
    UnrealizableRatio {
        pos: u32,
        neg: u32,
        available_pos: usize,
        available_neg: usize,
    },

    #[error("too few rows: {found} available, at least {required} required")]
    TooFewRows { required: usize, found: usize },

    #[error("pool row {row}, column `{column}`: {reason}")]
    PoolRow { row: usize, column: String, reason: String },

    #[error("training diverged: non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("solver did not converge within {iterations} iterations (KKT violation {violation:.3e})")]
    NotConverged { iterations: usize, violation: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("leakage guard: {0}")]
    Leakage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
