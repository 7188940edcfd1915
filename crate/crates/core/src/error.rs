use thiserror::Error;

use crate::model::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain of a function or parameter.
    #[error("{what} outside its domain: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("invalid model specification: {0}")]
    InvalidSpec(ValidationReport),

    /// A linear system could not be solved even after diagonal jitter.
    #[error("singular {0}")]
    Singular(&'static str),

    #[error("estimation failed: {0}")]
    Estimation(String),

    /// A per-observation quantity degenerated (zero variance, unit leverage).
    #[error("observation {index}: {reason}")]
    Degenerate { index: usize, reason: &'static str },

    #[error("{0} is undefined")]
    Undefined(&'static str),

    #[error("{0}")]
    Inconsistent(String),

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn domain(what: &'static str, value: f64) -> Self {
        Error::Domain { what, value }
    }
}
