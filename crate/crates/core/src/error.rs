use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the simulator, the inference engine or the
/// experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value or combination of values is invalid.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A numeric argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A worker or post id was not found.
    #[error("lookup failed: {0}")]
    Lookup(String),

    /// A caller broke an ordering or shape contract (time regression,
    /// dimension mismatch, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// The data carry no information about the requested quantity.
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// Gradient descent could not produce a finite objective.
    #[error("optimization failed: {message} (last valid theta {last_theta:?})")]
    Optimization {
        message: String,
        last_theta: Vec<f64>,
    },

    /// Malformed input to a statistics routine.
    #[error("invalid input: {0}")]
    Input(String),

    /// A simulation invariant did not hold. Always a bug.
    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
