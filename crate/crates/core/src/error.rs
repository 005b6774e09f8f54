use std::io;

/// Errors surfaced by loading, generation and batch execution.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("query generation failed: {0}")]
    Generation(String),

    #[error("malformed index dump: {0}")]
    IndexFormat(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
