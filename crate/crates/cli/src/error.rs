use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub const EXIT_OK: i32 = 0;
/// Runtime failure, including a reproduction that no longer matches.
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_INCONSISTENT: i32 = 3;
/// Malformed problem file or command line (`EX_USAGE`/`EX_DATAERR` style).
pub const EXIT_MALFORMED: i32 = 64;
pub const EXIT_UNKNOWN_KIND: i32 = 65;
pub const EXIT_NO_INPUT: i32 = 66;
pub const EXIT_CANT_CREATE: i32 = 73;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: io::Error },

    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: io::Error },

    #[error("malformed problem file: line {line}{}: {message}", if field.is_empty() { String::new() } else { format!(", field `{field}`") })]
    Malformed { line: usize, field: String, message: String },

    #[error("line {line}: unsupported phi kind `{kind}`")]
    UnknownKind { kind: String, line: usize },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] ssncert_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Read { .. } => EXIT_NO_INPUT,
            CliError::Write { .. } => EXIT_CANT_CREATE,
            CliError::Malformed { .. } | CliError::Usage(_) => EXIT_MALFORMED,
            CliError::UnknownKind { .. } => EXIT_UNKNOWN_KIND,
            CliError::Core(_) => EXIT_FAILURE,
        }
    }
}
