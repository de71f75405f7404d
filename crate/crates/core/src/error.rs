//! Crate-wide error type.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A name or id does not resolve against the active vocabulary.
    #[error("vocabulary error: {0}")]
    Vocab(String),

    /// Structural violation while building a graph or layout.
    #[error("invalid graph: {0}")]
    Graph(String),

    /// A record in a JSON-lines stream failed to parse.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A brute-force oracle was asked to handle an instance above its guard.
    #[error("size guard exceeded: {0}")]
    Size(String),

    /// Numeric input outside the documented domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Tensor or list dimensions do not agree.
    #[error("shape error: {0}")]
    Shape(String),

    /// A recorded forward structure does not match what it is replayed with.
    #[error("consistency error: {0}")]
    Consistency(String),

    /// Invalid user-supplied configuration or missing required input.
    #[error("input error: {0}")]
    Input(String),

    /// Training aborted (e.g. on a non-finite loss).
    #[error("training aborted: {0}")]
    Train(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than runtime failure.
    /// The CLI maps these to exit code 1, everything else to 2.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::Train(_))
    }
}
