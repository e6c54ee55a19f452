use thiserror::Error;

/// Command failures, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] btrf::Error),
    #[error("no frame could be relocalized")]
    AllFramesFailed,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::AllFramesFailed => 3,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
