use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid config: {0}")]
    Invalid(String),

    #[error(transparent)]
    Core(#[from] ifs_lab::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("not found: {0}")]
    NotFound(String),
}

impl CliError {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        CliError::Parse { line, message: message.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// Process exit status: 2 for anything wrong with the config, 3 for
    /// searches that came back empty, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Invalid(_) => 2,
            CliError::Core(e) if is_validation(e) => 2,
            CliError::NotFound(_) => 3,
            _ => 1,
        }
    }
}

fn is_validation(e: &ifs_lab::Error) -> bool {
    use ifs_lab::Error::*;
    matches!(
        e,
        InvalidWeights { .. }
            | InvalidSymbol { .. }
            | SpaceMismatch { .. }
            | InvalidParameter(_)
            | TooFine { .. }
            | TooLarge { .. }
            | Unsupported(_)
    )
}

pub type Result<T> = std::result::Result<T, CliError>;
