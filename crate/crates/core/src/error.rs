use std::io;

use thiserror::Error;

/// Errors raised anywhere in the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("unsupported dimension {0} (expected 3..=8)")]
    UnsupportedDimension(usize),

    #[error("unsupported set size {size} (at most {max})")]
    UnsupportedSize { size: usize, max: usize },

    #[error("empty point set")]
    EmptySet,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid level interval [{low}, {high}]")]
    InvalidInterval { low: f64, high: f64 },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("walk exceeded its step budget of {budget} steps")]
    Runaway { budget: u64 },

    #[error("coordinate {coord} does not fit the {bits}-bit packing used for d={dim}")]
    PackingOverflow { coord: i64, bits: u32, dim: usize },

    #[error("unregistered stream domain tag `{0}`")]
    UnknownTag(String),

    #[error("configuration error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("resource cap exceeded: {0}")]
    ResourceCap(String),

    #[error("malformed soup file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
