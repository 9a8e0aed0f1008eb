//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {context} ({left_h}x{left_w} vs {right_h}x{right_w})")]
    DimensionMismatch {
        context: &'static str,
        left_h: usize,
        left_w: usize,
        right_h: usize,
        right_w: usize,
    },

    #[error("length mismatch: {context} (expected {expected}, got {got})")]
    LengthMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("empty matching region: {0}")]
    EmptyMatchingRegion(&'static str),

    #[error("unknown object id {0}")]
    UnknownObject(u32),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("malformed file {path}: {reason}")]
    MalformedFile { path: String, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("report serialization failed: {0}")]
    Report(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by user-supplied parameters or inputs rather
    /// than the environment; the CLI maps these to exit code 2.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. } | Error::Report(_))
    }
}
