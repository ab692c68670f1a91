//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain name is empty after normalization")]
    EmptyDomain,

    #[error("domain name contains control characters: {0:?}")]
    InvalidDomain(String),

    #[error("invalid model config: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("train-mode forward needs a batch of at least 2 rows, got {0}")]
    BatchTooSmall(usize),

    #[error("backward needs activations from a train-mode forward")]
    StaleActivations,

    #[error("batch is empty")]
    EmptyBatch,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("dataset has no rows")]
    EmptyDataset,

    #[error("dataset too small to split: {0} rows leave an empty partition")]
    DatasetTooSmall(usize),

    #[error("prediction and truth lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("evaluation has no rows")]
    EmptyEvaluation,

    #[error("training diverged: loss is not finite at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },

    #[error("model bundle is corrupt: {0}")]
    CorruptBundle(String),

    #[error("model bundle format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// CLI exit code contract: 0 success, 1 usage, 2 data, 3 model.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::EmptyDomain
            | Error::InvalidDomain(_)
            | Error::Parse { .. }
            | Error::EmptyDataset
            | Error::DatasetTooSmall(_)
            | Error::EmptyEvaluation
            | Error::LengthMismatch(..)
            | Error::EmptyBatch
            | Error::Io(_) => 2,
            Error::InvalidConfig(_)
            | Error::DimMismatch { .. }
            | Error::BatchTooSmall(_)
            | Error::StaleActivations
            | Error::Diverged { .. }
            | Error::CorruptBundle(_)
            | Error::VersionMismatch { .. } => 3,
        }
    }
}
