use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value lies outside the mathematical domain of an operation
    /// (non-positive wealth, negative money leg, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A model or engine parameter is out of range.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// Too few samples or trajectory points for an estimator.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Engine state cannot support the requested operation.
    #[error("state error: {0}")]
    State(String),

    /// Configuration failed validation. `path` is the dotted key path.
    #[error("validation error at `{path}`: {message}")]
    Validation { path: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Wraps an error with the experiment/replica it came from.
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub fn insufficient(msg: impl Into<String>) -> Self {
        Error::InsufficientData(msg.into())
    }

    pub fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// True for errors caused by user input rather than a failed run.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Validation { .. } => true,
            Error::Context { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}
