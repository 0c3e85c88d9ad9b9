use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    /// A required column or key is missing, or a record is otherwise unusable.
    #[error("schema error: missing or invalid field {0:?}")]
    Schema(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("index error: {0}")]
    Index(String),

    /// Malformed checkpoint or dataset file.
    #[error("format error in {field}: {message}")]
    Format { field: String, message: String },

    /// Incompatible configuration, e.g. a checkpoint that does not match a dataset.
    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn format(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Argument(_) => 2,
            Error::Schema(_) | Error::Parse { .. } | Error::Format { .. } => 3,
            Error::Shape(_) | Error::Index(_) | Error::Config(_) => 4,
            Error::Io(_) => 5,
        }
    }
}
