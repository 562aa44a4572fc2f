use std::path::PathBuf;

use crate::combine::MethodTag;
use crate::lp::LpStatus;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A value or shape violates a type invariant at construction.
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    /// Panel and actuals (or two panels) disagree on their time index.
    #[error("time index mismatch at position {index}: {reason}")]
    Alignment { index: usize, reason: String },

    /// A fitted model was applied to data it was not fitted for.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("solver returned {status:?} while fitting {method} at level {level}")]
    Solver {
        method: MethodTag,
        level: f64,
        status: LpStatus,
    },

    /// A bare regression or program solve ended without an optimum.
    #[error("linear program ended with status {0:?}")]
    Lp(LpStatus),

    /// Something that cannot happen for well-formed input did happen.
    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Ingest(#[from] IngestError),

    #[error("weights file schema version {found} is not supported (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },

    #[error("cannot access {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn parameter(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Malformed input files. Line numbers are 1-based and count the header.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IngestError {
    #[error("line {line}: expected header `{expected}`, found `{found}`")]
    Header {
        line: usize,
        expected: String,
        found: String,
    },

    #[error("line {line}: wrong number of fields (expected {expected}, found {found})")]
    FieldCount { line: usize, expected: usize, found: usize },

    #[error("line {line}: field `{field}` is not a finite number: `{value}`")]
    NotNumeric {
        line: usize,
        field: &'static str,
        value: String,
    },

    #[error("line {line}: unparseable timestamp `{value}`")]
    Timestamp { line: usize, value: String },

    #[error("line {line}: duplicate entry for model `{model}`, timestamp {timestamp}, level {level} (first seen on line {first_line})")]
    Duplicate {
        line: usize,
        first_line: usize,
        model: String,
        timestamp: i64,
        level: f64,
    },

    #[error("missing forecast for model `{model}`, timestamp {timestamp}, level {level}")]
    MissingCell { model: String, timestamp: i64, level: f64 },

    #[error("line {line}: timestamp {timestamp} does not increase (previous {previous})")]
    Ordering { line: usize, timestamp: i64, previous: i64 },

    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },

    #[error("file contains no data rows")]
    Empty,
}
