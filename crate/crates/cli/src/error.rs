use std::path::PathBuf;

use thiserror::Error;

/// Failures of a CLI invocation, each with its own exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Config(String),

    #[error("run aborted: {0}")]
    Aborted(formation_core::Error),

    #[error("{}: {message}", path.display())]
    Log { path: PathBuf, message: String },
}

impl CliError {
    pub const EXIT_CONFIG: u8 = 3;
    pub const EXIT_IO: u8 = 4;
    pub const EXIT_ABORTED: u8 = 5;
    pub const EXIT_LOG: u8 = 6;

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => Self::EXIT_CONFIG,
            CliError::Io { .. } => Self::EXIT_IO,
            CliError::Aborted(_) => Self::EXIT_ABORTED,
            CliError::Log { .. } => Self::EXIT_LOG,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

impl From<formation_core::Error> for CliError {
    fn from(e: formation_core::Error) -> Self {
        match e {
            formation_core::Error::Config { .. } => CliError::Config(e.to_string()),
            other => CliError::Aborted(other),
        }
    }
}
