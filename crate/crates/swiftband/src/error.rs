//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by search spaces, datasets, predictors, schedulers and the
/// distributed runtime.
#[derive(Debug, Error)]
pub enum Error {
    /// A search space, scheduler or experiment configuration is invalid.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A metric value that must be finite was NaN or infinite.
    #[error("non-finite metric value: {0}")]
    NonFinite(f64),

    /// A dataset file could not be parsed; `row` is 1-based and counts the
    /// header as row 1.
    #[error("dataset error in {path} at row {row}: {msg}")]
    Dataset {
        path: String,
        row: usize,
        msg: String,
    },

    /// A trial was requested but the trial source is exhausted.
    #[error("trial source exhausted: {needed} trials required, {available} available")]
    SourceExhausted { needed: usize, available: usize },

    /// A numeric routine received input it cannot work with.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A wire frame could not be encoded or decoded.
    #[error("protocol error: {0}")]
    Protocol(String),

    /// The distributed runtime failed (lost workers, task failures, timeouts).
    #[error("distributed runtime error: {0}")]
    Distributed(String),

    /// An underlying I/O operation failed.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Reading or writing a CSV file failed.
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    /// JSON (de)serialization failed.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
