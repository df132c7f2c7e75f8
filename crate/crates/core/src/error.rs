use std::path::PathBuf;

/// Errors produced by the simulation toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid model parameters, run configuration or user input.
    #[error("configuration error: {0}")]
    Config(String),

    /// The dense eigensolver did not converge or its residual check failed.
    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    /// A mean-field trajectory produced a non-finite state.
    #[error("non-finite state at step {step} (t = {time}): {state:?}")]
    NonFinite {
        step: usize,
        time: f64,
        state: [f64; 3],
    },

    /// A trajectory inside an ensemble failed; carries what is needed to replay it.
    #[error("trajectory {index} (master seed {seed}) failed: {source}")]
    Trajectory {
        index: u64,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    /// Malformed serialized input (CSV, JSON, TOML, range specs).
    #[error("parse error: {0}")]
    Parse(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Eigen(_) | Error::NonFinite { .. } | Error::Trajectory { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
