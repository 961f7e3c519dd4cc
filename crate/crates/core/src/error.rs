//! Error type shared by all modules of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, got {got}")]
    DimensionMismatch {
        op: &'static str,
        expected: String,
        got: String,
    },

    #[error("{what} must be at least {min}, got {got}")]
    TooSmall {
        what: &'static str,
        min: usize,
        got: usize,
    },

    #[error("invalid variant configuration: {0}")]
    InvalidVariant(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("{path}:{line}: {msg}")]
    Csv {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("checkpoint version mismatch: expected {expected:?}, got {got:?}")]
    VersionMismatch { expected: String, got: String },

    #[error("checkpoint parse error: {0}")]
    CheckpointParse(String),

    #[error("checkpoint shape inconsistency: {0}")]
    CheckpointShape(String),

    #[error("weather coverage gap, missing hours: {0}")]
    CoverageGap(String),

    #[error("feature {index} ({name}) is constant on the training partition")]
    ConstantFeature { index: usize, name: String },

    #[error("power iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("training loss became non-finite at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },

    // Display leaves the cause to the #[source] chain so reporters that
    // walk it (anyhow's {:#}) do not print the message twice.
    #[error("replicate {replicate} failed")]
    Replicate {
        replicate: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("capacity must be positive, got {0}")]
    BadCapacity(f64),

    #[error("{0}")]
    Invalid(String),

    #[error("io error on {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
