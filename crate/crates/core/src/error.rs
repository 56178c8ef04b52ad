use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or scenario field failed validation. `field` is a dotted path.
    #[error("invalid configuration at `{field}`: {message}")]
    Config { field: String, message: String },

    /// An internal invariant was broken during a computation.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(
        "limit solver diverged at t = {time}: conservation residual {residual:.3e} exceeds \
         ceiling {ceiling:.3e}; try a smaller dt or a larger sample count"
    )]
    Divergence {
        time: f64,
        residual: f64,
        ceiling: f64,
    },

    #[error("horizon too short: force of infection is still {f_bar:.3e} at t = {time}")]
    HorizonTooShort { time: f64, f_bar: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("PDE mass leakage {leak:.3e} exceeds tolerance {tolerance:.3e} at t = {time}")]
    MassLeak {
        time: f64,
        leak: f64,
        tolerance: f64,
    },

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn config_err(field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        message: message.into(),
    }
}
