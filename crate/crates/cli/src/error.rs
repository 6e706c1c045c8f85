use thiserror::Error;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] prosail_tvae::Error),

    /// Bad flags, configuration or input files.
    #[error("{0}")]
    Usage(String),

    /// The command ran but its outputs failed validation.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    /// 2 for input errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_input_error() => 2,
            CliError::Core(_) | CliError::Failed(_) => 1,
            CliError::Usage(_) => 2,
        }
    }
}
