use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value or configuration violates a documented constraint.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("not found: {0}")]
    NotFound(String),

    /// Triple ingestion could not produce a graph.
    #[error("ingestion error: {0}")]
    Ingest(String),

    /// Malformed text input. `line` is 1-based when known.
    #[error("parse error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse {
        line: Option<usize>,
        message: String,
    },

    /// Live LLM endpoint failure after retries.
    #[error("transport error: {0}")]
    Transport(String),

    /// Mock transcript exhausted or mismatched.
    #[error("transcript error: {0}")]
    Transcript(String),

    /// Well-formed input that cannot support the requested run.
    #[error("data error: {0}")]
    Data(String),

    /// Graph artifact has the wrong magic or version.
    #[error("artifact error: {0}")]
    Artifact(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn not_found(msg: impl Into<String>) -> Self {
        Error::NotFound(msg.into())
    }

    pub fn parse(line: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }
}
