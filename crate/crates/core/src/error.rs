use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid embedding: {0}")]
    InvalidEmbedding(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("step {k} outside schedule range 0..={total}")]
    StepOutOfRange { k: u32, total: u32 },

    #[error("invalid threshold table: {0}")]
    InvalidThresholds(String),

    #[error("invalid snapshot: {0}")]
    InvalidSnapshot(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("trace line {line}: {message}")]
    Trace { line: usize, message: String },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("cannot access {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
