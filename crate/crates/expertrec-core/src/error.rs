use thiserror::Error;

/// Errors surfaced by the core library. The CLI maps these onto exit codes:
/// configuration problems, missing pipeline artifacts, and runtime failures
/// are distinguishable by variant.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("config mismatch: {0}")]
    ConfigMismatch(String),

    #[error("{path}:{line}: parse error: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("missing artifact: {what} (run `{hint}` first)")]
    MissingArtifact { what: String, hint: String },

    #[error("value iteration did not converge within {iterations} sweeps (residual {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("training diverged: gradient norm {grad_norm:.3e} exceeds {threshold:.3e}")]
    TrainingDiverged { grad_norm: f64, threshold: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn parse(path: &std::path::Path, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.display().to_string(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
