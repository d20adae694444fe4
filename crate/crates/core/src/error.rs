use num_complex::Complex64;
use thiserror::Error;

use crate::codec::DecodeResult;

pub type Result<T, E = FortaError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum FortaError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    /// A root of the error-locator polynomial did not land near any root of unity.
    #[error("localization failure: locator root {root} is not within tolerance of any evaluation point")]
    LocalizationFailure { root: Complex64 },

    /// The decoder produced an answer whose re-encoding does not match the received word.
    #[error("decode unreliable: residual {residual:.3e} exceeds limit {limit:.3e}")]
    DecodeUnreliable {
        residual: f64,
        limit: f64,
        partial: Box<DecodeResult>,
    },

    #[error("protocol violation: {0}")]
    ProtocolViolation(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("line {line}: {message}")]
    Ingestion { line: usize, message: String },

    /// Configuration value rejected at parse time; `key` is the dotted path, e.g. `protocol.A`.
    #[error("{key}: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl FortaError {
    pub(crate) fn invalid_argument(msg: impl Into<String>) -> Self {
        FortaError::InvalidArgument(msg.into())
    }

    pub(crate) fn invalid_configuration(msg: impl Into<String>) -> Self {
        FortaError::InvalidConfiguration(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        FortaError::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
