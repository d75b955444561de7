use std::fmt;

/// Command failure, split by exit code: configuration problems exit with 2,
/// problems with the data on disk exit with 3.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Data(_) => 3,
        }
    }

    pub fn config(context: impl fmt::Display, err: impl fmt::Display) -> Self {
        Self::Config(format!("{context}: {err}"))
    }

    pub fn data(context: impl fmt::Display, err: impl fmt::Display) -> Self {
        Self::Data(format!("{context}: {err}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
