//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RegeError {
    /// Malformed input file; carries the 1-based line number.
    #[error("parse error in {path} at line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    /// Incompatible shapes between two objects that must chain.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: String,
        expected: String,
        actual: String,
    },

    /// A parameter outside its documented domain.
    #[error("invalid parameter `{name}`: {message}")]
    Parameter { name: String, message: String },

    /// An operation called on data that does not satisfy its preconditions.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Numerical failure (e.g. an eigensolver that did not converge).
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl RegeError {
    pub fn parameter(name: &str, message: impl Into<String>) -> Self {
        RegeError::Parameter {
            name: name.to_string(),
            message: message.into(),
        }
    }

    pub fn dimension(context: &str, expected: impl Into<String>, actual: impl Into<String>) -> Self {
        RegeError::Dimension {
            context: context.to_string(),
            expected: expected.into(),
            actual: actual.into(),
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        RegeError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, RegeError>;
