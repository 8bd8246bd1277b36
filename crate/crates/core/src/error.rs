//! Crate-wide error type.
//!
//! Two broad classes matter to callers: `Validation` errors mean the input
//! (config file, CLI argument, mismatched data) was rejected before any work
//! started; everything else is a runtime failure. The CLI maps the former to
//! exit code 1 and the latter to exit code 2.

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad user input: rejected config values, out-of-range arguments,
    /// incompatible model/data combinations.
    #[error("validation: {0}")]
    Validation(String),

    /// I/O failure with the offending path attached.
    #[error("i/o on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A file existed but could not be parsed (TOML config, JSONL dataset,
    /// JSON model, CSV table).
    #[error("parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    /// Internal failure while running a simulation or training job.
    #[error("runtime: {0}")]
    Runtime(String),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        Error::Runtime(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors that should be reported as rejected input rather than
    /// as a failed run.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Validation(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
