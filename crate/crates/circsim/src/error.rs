use thiserror::Error;

/// Failures of a run, split by the exit code they map to.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration or command line.
    #[error("{0}")]
    Config(String),
    /// A solver failed on a valid configuration.
    #[error("solver failure: {0}")]
    Solver(circsim_core::Error),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Solver(_) | CliError::Io { .. } => 2,
        }
    }
}

impl From<circsim_core::Error> for CliError {
    fn from(e: circsim_core::Error) -> Self {
        match e {
            circsim_core::Error::InvalidParameter { .. } | circsim_core::Error::DimensionMismatch { .. } => {
                CliError::Config(crate::config::describe_invalid(&e))
            }
            other => CliError::Solver(other),
        }
    }
}
