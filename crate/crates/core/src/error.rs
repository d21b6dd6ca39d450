//! Error type shared across the toolkit, with the CLI exit-code mapping.

use std::fmt;

/// Toolkit-wide error. Variants map onto the CLI exit codes:
/// config errors exit 2, data errors exit 3, numeric failures exit 4.
#[derive(Debug)]
pub enum SiError {
    /// Invalid configuration, argument, or call contract violation.
    Config(String),
    /// Missing, malformed, or inconsistent data (files, corpora, formats).
    Data(String),
    /// Numeric failure: non-finite values, divergence, failed checks.
    Numeric(String),
    Io(std::io::Error),
}

impl SiError {
    pub fn exit_code(&self) -> i32 {
        match self {
            SiError::Config(_) => 2,
            SiError::Data(_) | SiError::Io(_) => 3,
            SiError::Numeric(_) => 4,
        }
    }
}

impl fmt::Display for SiError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SiError::Config(msg) => write!(f, "config error: {msg}"),
            SiError::Data(msg) => write!(f, "data error: {msg}"),
            SiError::Numeric(msg) => write!(f, "numeric error: {msg}"),
            SiError::Io(err) => write!(f, "io error: {err}"),
        }
    }
}

impl std::error::Error for SiError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            SiError::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<std::io::Error> for SiError {
    fn from(err: std::io::Error) -> Self {
        SiError::Io(err)
    }
}

pub type Result<T> = std::result::Result<T, SiError>;
