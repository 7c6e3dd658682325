use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the identification toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("insufficient data: need at least {needed} nodes, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("rotation is not identifiable from this node set: {0}")]
    RotationUnidentifiable(String),

    #[error("insufficient experiments: need at least 6, got {0}")]
    InsufficientExperiments(usize),

    #[error("compliance matrix is not identifiable: {0}")]
    Unidentifiable(String),

    #[error("non-physical matrix: {0}")]
    NonPhysical(String),

    #[error("load recommendation failed: {0}")]
    Recommendation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed file: {message}")]
    Format { path: PathBuf, message: String },
}

/// Coarse classification used to map errors onto process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Numerical,
    Io,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidInput(_)
            | Error::InsufficientData { .. }
            | Error::InsufficientExperiments(_)
            | Error::Recommendation(_)
            | Error::Format { .. } => ErrorClass::Validation,
            Error::RotationUnidentifiable(_) | Error::Unidentifiable(_) | Error::NonPhysical(_) => {
                ErrorClass::Numerical
            }
            Error::Io { .. } => ErrorClass::Io,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
