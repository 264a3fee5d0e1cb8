use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration, missing inputs or prerequisite artifacts. Exit code 1.
    #[error("{0}")]
    Validation(String),
    /// Failure while running a valid request. Exit code 2.
    #[error("{0}")]
    Runtime(String),
    #[error(transparent)]
    Core(#[from] calikd::Error),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use calikd::Error as E;
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Core(E::Diverged { .. } | E::Io { .. }) => 2,
            CliError::Core(_) => 1,
        }
    }
}
