use thiserror::Error;

/// Failures surfaced to the shell, split by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed input files, flags, or configuration (exit code 2).
    #[error("{0}")]
    Input(String),
    /// An estimator or solver could not produce a result (exit code 3).
    #[error("{0}")]
    Numerical(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<dshrink::Error> for CliError {
    fn from(e: dshrink::Error) -> Self {
        match e {
            dshrink::Error::Solver { .. } | dshrink::Error::Degenerate(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}
