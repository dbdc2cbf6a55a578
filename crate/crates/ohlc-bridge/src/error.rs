use std::io;

use ohlc_bridge_core::Error as CoreError;
use thiserror::Error;

/// Failures of the IO, simulation and pipeline layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Numeric(#[from] ohlc_bridge_core::Error),

    #[error("io error: {0}")]
    Io(#[from] io::Error),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("path matrix needs {required} bytes, budget is {budget}")]
    Capacity { required: u64, budget: u64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("bad summary dump: {0}")]
    Format(String),
}

impl Error {
    /// CLI exit code: 2 for data problems, 3 for numeric failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numeric(e) => match e {
                CoreError::EmptyInput | CoreError::DegenerateBar { .. } | CoreError::Gap { .. } | CoreError::Shape { .. } | CoreError::Domain { .. } => 2,
                _ => 3,
            },
            Error::Io(_) | Error::Parse { .. } | Error::Format(_) => 2,
            Error::Capacity { .. } | Error::Config(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
