use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config not found: {0}")]
    ConfigNotFound(PathBuf),

    #[error("malformed config: {0}")]
    MalformedConfig(String),

    #[error("invalid value for `{field}`: {reason}")]
    InvalidField { field: String, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical instability at t = {time} s: {detail}")]
    Instability { time: f64, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn field(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidField {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors that stem from the numerics rather than the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Instability { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
