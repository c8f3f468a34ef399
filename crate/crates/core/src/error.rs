use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by kernel, estimator, oracle, testing and data routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value at position {index}")]
    NonFinite { index: usize },

    #[error("empty sample")]
    EmptySample,

    #[error("shape mismatch in {context}: {left:?} vs {right:?}")]
    ShapeMismatch {
        context: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("invalid bandwidth {0}: must be positive and finite")]
    InvalidBandwidth(f64),

    #[error("{what} = {value} is out of range [{min}, {max}]")]
    OutOfRange {
        what: &'static str,
        value: usize,
        min: usize,
        max: usize,
    },

    #[error("sample sizes must be equal, got {left} and {right}")]
    UnequalSampleSizes { left: usize, right: usize },

    #[error("oracle budget exceeded: {summands} summands > {budget}")]
    BudgetExceeded { summands: u128, budget: u128 },

    #[error("expected {expected} components, found {found}")]
    ComponentMismatch { expected: usize, found: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no positive root of b^2 + ab + a^2 = c^2 for a = {a}, c = {c}")]
    NoPositiveRoot { a: f64, c: f64 },

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV row {row}: {message}")]
    MalformedRow { row: u64, message: String },

    #[error("non-numeric value {value:?} in row {row}, column {column}")]
    NonNumeric {
        row: u64,
        column: usize,
        value: String,
    },

    #[error("column {column} does not exist (row {row} has {width} fields)")]
    MissingColumn { row: u64, column: usize, width: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
