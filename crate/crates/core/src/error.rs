use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("decode error at byte offset {offset}: {message}")]
    Decode { offset: u64, message: String },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape error: {context}: got {got:?}, expected {expected:?}")]
    Shape {
        context: String,
        got: Vec<usize>,
        expected: Vec<usize>,
    },

    #[error("input too short: {0}")]
    InputTooShort(String),

    #[error("state error: {0}")]
    State(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn shape(context: impl Into<String>, got: &[usize], expected: &[usize]) -> Self {
        Error::Shape {
            context: context.into(),
            got: got.to_vec(),
            expected: expected.to_vec(),
        }
    }

    /// Process exit code for this error class: 1 validation/config, 2 I/O, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            Error::Numerical(_) => 3,
            _ => 1,
        }
    }
}
