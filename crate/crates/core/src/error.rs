use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Two array dimensions that must agree do not.
    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    Shape { context: &'static str, expected: usize, found: usize },

    /// An argument lies outside the domain of the operation (e.g. temperature <= 0).
    #[error("domain error: {0}")]
    Domain(String),

    /// Input data violates a type invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// Inconsistent or incomplete configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed file contents. `location` names the row or header field.
    #[error("format error at {location}: {message}")]
    Format { location: String, message: String },

    /// An IDX payload whose length disagrees with the header.
    #[error("truncated payload: header declares {declared} bytes, found {available}")]
    Truncated { declared: usize, available: usize },

    #[error("training diverged at epoch {epoch}: {reason}")]
    Diverged { epoch: usize, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format { location: location.into(), message: message.into() }
    }
}
