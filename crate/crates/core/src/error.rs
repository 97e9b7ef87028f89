//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by the library. All of them map to CLI exit code 1.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("planning error: {0}")]
    Planning(String),
    #[error("capture error: {0}")]
    Capture(String),
    #[error("sample rate mismatch: {0} Hz vs {1} Hz")]
    RateMismatch(f64, f64),
    #[error("localization aborted for {ue}: {reason}")]
    Localization { ue: String, reason: String },
    #[error("parse error in {path} at byte {offset}: {msg}")]
    Parse { path: String, offset: u64, msg: String },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Other(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { context: context.into(), source }
    }
}
