//! Crate-wide error type, grouped into the failure classes the CLI
//! maps to distinct exit codes.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("smiles error at offset {offset}: {msg}")]
    Smiles { offset: usize, msg: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("unknown {kind} '{name}'")]
    Lookup { kind: &'static str, name: String },

    #[error("capability error: {0}")]
    Capability(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse failure class; each class gets its own process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numerical,
    Other,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Other => 1,
            ErrorClass::Config => 2,
            ErrorClass::Data => 3,
            ErrorClass::Numerical => 4,
        }
    }
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::Capability(_) => ErrorClass::Config,
            Error::Parse { .. }
            | Error::Smiles { .. }
            | Error::Schema(_)
            | Error::Lookup { .. }
            | Error::Checkpoint(_)
            | Error::Io(_) => ErrorClass::Data,
            Error::Numerical(_) | Error::UndefinedMetric(_) => ErrorClass::Numerical,
            Error::Contract(_) => ErrorClass::Other,
        }
    }
}
