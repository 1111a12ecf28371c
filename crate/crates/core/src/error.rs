use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sample index {t} out of range (valid {min}..={max})")]
    IndexOutOfRange { t: usize, min: isize, max: isize },

    #[error("dataset too short: {len} samples, need at least {needed}")]
    DatasetTooShort { len: usize, needed: usize },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{what} is singular (reciprocal condition number {rcond:.3e} < {threshold:.0e})")]
    Singular {
        what: &'static str,
        rcond: f64,
        threshold: f64,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("simulation diverged at sample {sample}: |y| = {position:.3e} m")]
    Divergence { sample: usize, position: f64 },

    #[error("empty input to {0}")]
    Empty(&'static str),

    #[error("invalid configuration `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn dims(context: &'static str, expected: usize, got: usize) -> Self {
        Error::DimensionMismatch {
            context,
            expected,
            got,
        }
    }

    /// Process exit status for the command line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 1,
            Error::Io { .. } | Error::Format { .. } => 3,
            _ => 2,
        }
    }
}
