use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("label {label} is outside 1..={classes}")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("an ordinal label space needs at least 2 classes, got {0}")]
    TooFewClasses(usize),

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("class {0} has no labeled examples")]
    MissingClass(usize),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("thresholds are not strictly increasing; order penalty is infinite")]
    InfeasibleThresholds,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("objective became non-finite at epoch {epoch} (value {value})")]
    Divergence { epoch: usize, value: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: line {line}, column {column}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        reason: String,
    },

    #[error("malformed model file: {0}")]
    ModelFormat(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
