#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad input: unreadable or invalid configuration, missing files,
    /// malformed CSV.
    #[error("{0}")]
    Config(String),

    /// Failure while sampling or writing results.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    pub(crate) fn config(e: impl std::fmt::Display) -> Self {
        CliError::Config(e.to_string())
    }

    pub(crate) fn runtime(e: impl std::fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }

    pub(crate) fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::Runtime(format!("{}: {e}", path.display()))
    }
}

pub type CliResult<T> = Result<T, CliError>;
