use thiserror::Error;

/// Errors raised by the post-processing and modelling routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration field `{field}`: {reason}")]
    Config { field: &'static str, reason: String },

    #[error("time-tag stream is empty")]
    EmptyStream,

    #[error("invalid time-tag stream: {0}")]
    InvalidStream(String),

    #[error("no correlation peak above threshold (significance {significance:.2} sigma, need {threshold:.2})")]
    NoPeak { significance: f64, threshold: f64 },

    #[error("drift tracking needs at least 2 segments with a peak, found {found}")]
    InsufficientSegments { found: usize },

    #[error("insufficient sifted data: {available} pairs, need at least {required}")]
    InsufficientData { available: usize, required: usize },

    #[error("pass never reaches the {min_elevation} deg gate (max elevation {max_elevation} deg)")]
    NoVisibility {
        max_elevation: f64,
        min_elevation: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config_err(field: &'static str, reason: impl Into<String>) -> Error {
    Error::Config {
        field,
        reason: reason.into(),
    }
}
