use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("no data rows")]
    NoDataRows,

    #[error("row {row}: {message}")]
    BadRow { row: usize, message: String },

    #[error("series `{id}` has {len} values, need at least {min}")]
    SeriesTooShort { id: String, len: usize, min: usize },

    #[error("series `{id}` contains a non-finite value at position {index}")]
    NonFiniteValue { id: String, index: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("length mismatch in {context}: expected {expected}, got {got}")]
    LengthMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{0} is empty")]
    Empty(&'static str),

    #[error("bounds cross at step {step}: alpha {alpha} > beta {beta}")]
    CrossedBounds { step: usize, alpha: f64, beta: f64 },

    #[error("non-finite value encountered during {0}")]
    NonFinite(&'static str),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
}

pub(crate) fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::LengthMismatch { context, expected, got });
    }
    Ok(())
}
