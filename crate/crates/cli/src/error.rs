use std::process::ExitCode;

/// Failures surfaced to the command line, split by exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Problems with the input data (exit code 1).
    #[error("data error: {0}")]
    Data(String),
    /// Invalid configuration or arguments (exit code 2).
    #[error("config error: {0}")]
    Config(String),
}

impl CliError {
    pub fn data(msg: impl Into<String>) -> Self {
        Self::Data(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            Self::Data(_) => ExitCode::from(1),
            Self::Config(_) => ExitCode::from(2),
        }
    }

    /// Prefixes the message, keeping the kind.
    pub fn context(self, ctx: impl std::fmt::Display) -> Self {
        match self {
            Self::Data(m) => Self::Data(format!("{ctx}: {m}")),
            Self::Config(m) => Self::Config(format!("{ctx}: {m}")),
        }
    }
}

impl From<cojump::Error> for CliError {
    fn from(e: cojump::Error) -> Self {
        match e {
            cojump::Error::Config(m) => Self::Config(m),
            other => Self::Data(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
