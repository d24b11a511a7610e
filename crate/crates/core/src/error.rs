use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value violated a domain invariant.
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },

    /// The emission mask does not cover part of the victim channel.
    #[error("emission mask undefined over {from_hz} Hz .. {to_hz} Hz")]
    UndefinedMaskRegion { from_hz: f64, to_hz: f64 },

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("covariance {name} is not symmetric positive definite")]
    NotPositiveDefinite { name: String },

    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },

    /// The toy model produced a non-finite state.
    #[error("model blew up at step {step} (dt too large?)")]
    BlowUp { step: usize },

    /// The minimizer hit a non-finite cost; `last_iterate` is the last finite control.
    #[error("non-finite cost after {iterations} iterations")]
    NonFiniteCost {
        iterations: usize,
        last_iterate: Vec<f64>,
    },

    /// A module error annotated with the scenario position it came from.
    #[error("leakage level {level} dBW, member {member}: {source}")]
    Scenario {
        level: String,
        member: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad input rather than a failed run.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Validation { .. }
            | Error::UndefinedMaskRegion { .. }
            | Error::Dimension { .. }
            | Error::NotPositiveDefinite { .. }
            | Error::Config { .. } => true,
            Error::Scenario { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}
