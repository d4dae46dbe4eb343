//! Error types shared across the library.

use thiserror::Error;

/// Coarse error category, used by callers (e.g. the CLI) to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Usage,
    Data,
    Numeric,
    Integrity,
    Other,
}

#[derive(Debug, Error)]
pub enum RedError {
    /// A caller violated a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// An argument is outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Shape disagreement between an operand and what the operation expects.
    #[error("shape mismatch: expected {expected}, got {got} ({context})")]
    ShapeMismatch {
        expected: String,
        got: String,
        context: String,
    },

    /// A transform parameter violates its invertibility floor.
    #[error("singular transform: {0}")]
    Singular(String),

    /// A non-finite value appeared during evaluation.
    #[error("non-finite value in {location}")]
    NonFinite { location: String },

    /// Malformed input data (CSV parse failures, label domain, ragged rows).
    #[error("data error at row {row}, column {column}: {message}")]
    Data {
        row: usize,
        column: usize,
        message: String,
    },

    /// Dataset-level problem not tied to a single cell.
    #[error("dataset error: {0}")]
    Dataset(String),

    /// Checkpoint file uses an unsupported format version.
    #[error("checkpoint version mismatch: file has {found}, supported {supported}")]
    CheckpointVersion { found: u32, supported: u32 },

    /// Checkpoint file is truncated or structurally invalid.
    #[error("corrupt checkpoint: {0}")]
    CheckpointCorrupt(String),

    /// Stored state fails its integrity check (probe hash disagreement).
    #[error("integrity check failed: {0}")]
    Integrity(String),

    /// A statistical test cannot be computed on the given inputs.
    #[error("degenerate test: {0}")]
    DegenerateTest(String),

    /// A numeric verification (e.g. gradient check) did not pass.
    #[error("numeric check failed: {0}")]
    NumericCheck(String),

    /// Training diverged and could not recover.
    #[error("training aborted: {0}")]
    TrainingAborted(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl RedError {
    pub fn shape(expected: impl Into<String>, got: impl Into<String>, context: &str) -> Self {
        RedError::ShapeMismatch {
            expected: expected.into(),
            got: got.into(),
            context: context.to_string(),
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            RedError::Contract(_) | RedError::Domain(_) => ErrorCategory::Usage,
            RedError::Data { .. } | RedError::Dataset(_) | RedError::Io(_) => ErrorCategory::Data,
            RedError::ShapeMismatch { .. }
            | RedError::Singular(_)
            | RedError::NonFinite { .. }
            | RedError::DegenerateTest(_)
            | RedError::NumericCheck(_)
            | RedError::TrainingAborted(_) => ErrorCategory::Numeric,
            RedError::CheckpointVersion { .. }
            | RedError::CheckpointCorrupt(_)
            | RedError::Integrity(_) => ErrorCategory::Integrity,
        }
    }
}

pub type Result<T> = std::result::Result<T, RedError>;
