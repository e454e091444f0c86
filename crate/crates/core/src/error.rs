use std::path::PathBuf;

/// Errors produced anywhere in the simulator.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid configuration values (dimensions, regularizer, probabilities, config files).
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed call arguments: length mismatches, out-of-range indices, non-finite data.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A matrix that should be positive definite failed to factor.
    #[error("numerical degeneracy: {0}")]
    Degenerate(String),

    /// The LP objective is unbounded above.
    #[error("linear program is unbounded")]
    Unbounded,

    /// The simplex method hit its pivot cap.
    #[error("simplex iteration limit of {0} pivots exceeded")]
    IterationLimit(usize),

    /// A runtime invariant check failed.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// Whether the error stems from user-supplied configuration or input (as opposed to a
    /// numerical or runtime failure).
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Argument(_) | Error::Parse { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
