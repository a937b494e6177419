//! Error type shared by all benchmark modules.

use thiserror::Error;

/// Errors produced anywhere in the benchmark pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A cell in an input file could not be parsed.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// Input data violates a structural invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// A statistic is undefined for the given input (too few rows, non-positive mean, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// An index or count is out of its admissible range.
    #[error("range error: {0}")]
    Range(String),

    /// A qubit or unit index is out of bounds.
    #[error("index error: {0}")]
    Index(String),

    /// Vector or matrix dimensions do not agree.
    #[error("size error: {0}")]
    Size(String),

    /// A linear system stayed singular after regularization, or a matrix
    /// lost positive definiteness beyond repair.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// The evaluation budget cannot cover a single generation.
    #[error("budget error: {0}")]
    Budget(String),

    /// A training or benchmark configuration value is invalid.
    #[error("config error: {0}")]
    Config(String),

    /// An operation that needs at least one element received none.
    #[error("empty input: {0}")]
    Empty(String),

    /// Every cardinality-constrained subproblem was infeasible at the
    /// requested return level.
    #[error("no feasible subset: {0}")]
    NoFeasibleSubset(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
