use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("malformed header: {0}")]
    Header(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("abbreviation {abbrev:?} is shared by journals {first} and {second}")]
    AmbiguousAbbreviation {
        abbrev: String,
        first: String,
        second: String,
    },

    #[error("merge group {group} spans fields {first} and {second}")]
    MergeFieldConflict {
        group: String,
        first: String,
        second: String,
    },

    #[error("window mismatch: numerator counted over {numerator}, denominator over {denominator}")]
    WindowMismatch {
        numerator: String,
        denominator: String,
    },

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// A record-level problem found while reading an input file. The record is
/// skipped and loading continues.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordError {
    /// 1-based line number in the source file.
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for RecordError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}
