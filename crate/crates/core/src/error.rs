use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not symmetric (max deviation {deviation:e})")]
    Asymmetric { deviation: f64 },

    #[error("matrix is singular or not positive definite (eigenvalue {eigenvalue:e})")]
    Singular { eigenvalue: f64 },

    #[error("iteration did not converge after {iterations} steps")]
    Convergence { iterations: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid model: {0}")]
    Model(String),

    #[error("metric undefined: {0}")]
    Metric(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("solver diverged at iteration {iteration} (objective {objective:e})")]
    Divergence {
        iteration: usize,
        objective: f64,
        trace: Vec<f64>,
    },

    #[error("generation failed: {0}")]
    Generation(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 3,
            Error::Divergence { .. } => 4,
            _ => 2,
        }
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            Error::Io(e.into())
        } else {
            Error::Config(e.to_string())
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::Io(io),
                _ => unreachable!(),
            }
        } else {
            Error::Format(e.to_string())
        }
    }
}
