//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, DailError>;

#[derive(Debug, Error)]
pub enum DailError {
    #[error("duplicate sample id {0:?}")]
    DuplicateSample(String),

    #[error("unknown sample id {0:?}")]
    UnknownSample(String),

    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("prompt template error: {0}")]
    Template(String),

    #[error("prompt parse error: {0}")]
    PromptParse(String),

    #[error("dataset error at line {line}: {msg}")]
    Dataset { line: usize, msg: String },

    #[error("transport error after {attempts} attempt(s): {msg}")]
    Transport { attempts: u32, msg: String },

    #[error("malformed response from endpoint: {0}")]
    MalformedResponse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl DailError {
    /// True for failures worth retrying (network-level trouble), false for
    /// everything that a retry cannot fix.
    pub fn is_retryable(&self) -> bool {
        matches!(self, DailError::Transport { .. })
    }
}
