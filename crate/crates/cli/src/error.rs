use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("invalid measure: {0}")]
    Measure(bandtrace_core::Error),
    #[error("cannot read {}: {source}", path.display())]
    ConfigIo {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("numerical failure: {0}")]
    Numerical(#[from] bandtrace_core::Error),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("cannot write {}: {source}", path.display())]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Syntax { .. }
            | CliError::Schema { .. }
            | CliError::Measure(_)
            | CliError::ConfigIo { .. } => 2,
            CliError::Numerical(_) => 3,
            CliError::Verification(_) => 4,
            CliError::Output { .. } => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
