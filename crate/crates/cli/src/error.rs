use std::path::PathBuf;

use thiserror::Error;

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },

    #[error("{0}")]
    Data(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Core(#[from] krylov_pls::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use krylov_pls::Error as E;
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Parse { .. } | CliError::Data(_) | CliError::Io { .. } => EXIT_DATA,
            CliError::Core(e) => match e {
                E::InvalidArgument(_) | E::InvalidConfig(_) => EXIT_USAGE,
                E::DimensionMismatch(_)
                | E::EmptyInput(_)
                | E::ZeroResponse
                | E::AllColumnsConstant
                | E::DomainViolation { .. }
                | E::NotPositiveSemidefinite { .. } => EXIT_DATA,
                _ => EXIT_NUMERICAL,
            },
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
