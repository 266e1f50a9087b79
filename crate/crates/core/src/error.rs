//! Error type shared by all modules.

use alloc::string::String;
use core::fmt;

/// Errors surfaced by the library.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An input collection that must be non-empty was empty.
    EmptyInput(&'static str),
    /// Two shapes that must agree did not.
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    /// A configuration value violated its invariant.
    InvalidConfig(String),
    /// A computation produced or received a non-finite value.
    NonFinite(String),
    /// A vector with zero norm where a direction is required.
    ZeroVector,
    /// A phone class was requested that the pool does not contain.
    UnknownClass(String),
    /// A phone class exists but has no reference segments.
    EmptyClass(String),
    /// Two segments share an id where ids must be unique.
    DuplicateSegmentId(String),
    /// Threshold calibration needs both labels present.
    SingleLabelDevSet,
    /// The dataset cannot support the requested sampling or evaluation.
    InsufficientData(String),
    /// A time span does not map to a valid frame range.
    InvalidSpan(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyInput(what) => write!(f, "empty input: {what}"),
            Error::DimensionMismatch {
                what,
                expected,
                actual,
            } => write!(f, "dimension mismatch in {what}: expected {expected}, got {actual}"),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::NonFinite(msg) => write!(f, "non-finite value: {msg}"),
            Error::ZeroVector => write!(f, "zero vector has no direction"),
            Error::UnknownClass(label) => write!(f, "unknown phone class: {label}"),
            Error::EmptyClass(label) => write!(f, "no reference segments for class: {label}"),
            Error::DuplicateSegmentId(id) => write!(f, "duplicate segment id: {id}"),
            Error::SingleLabelDevSet => {
                write!(f, "threshold calibration requires both labels in the dev set")
            }
            Error::InsufficientData(msg) => write!(f, "insufficient data: {msg}"),
            Error::InvalidSpan(msg) => write!(f, "invalid segment span: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
