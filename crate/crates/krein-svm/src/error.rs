//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A factorization hit a pivot below the singularity tolerance.
    #[error("matrix is singular: pivot magnitude {pivot:.3e} below tolerance {tol:.3e}")]
    SingularMatrix { pivot: f64, tol: f64 },

    /// An iterative method ran out of its iteration budget.
    #[error("{method} did not converge within {limit} iterations")]
    NoConvergence { method: &'static str, limit: usize },

    /// Two operands disagree on a dimension.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// An index is outside the valid range.
    #[error("index {index} out of range for size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    /// The requested shift does not sit at or below the least eigenvalue,
    /// so the shifted matrix is not positive semidefinite.
    #[error("shift {lambda} is not at or below the least eigenvalue: K - lambda*I failed the definiteness check")]
    NotNegativeEnough { lambda: f64 },

    /// Training data does not contain both classes.
    #[error("training data must contain both classes")]
    DegenerateData,

    /// A split left the training set without both classes.
    #[error("split left the training set without both classes (seed {seed})")]
    DegenerateSplit { seed: u64 },

    /// A configuration value is out of its valid range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A text input could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A label is outside {-1, +1} and has no defined mapping.
    #[error("label {0} is not in {{-1, +1}} (only 0 is remapped, to -1)")]
    Label(f64),

    /// A matrix that must be symmetric is not.
    #[error("matrix is not symmetric: |A[{i}][{j}] - A[{j}][{i}]| = {delta:.3e} exceeds {tol:.3e}")]
    Asymmetric { i: usize, j: usize, delta: f64, tol: f64 },

    /// The operation is undefined for precomputed kernels.
    #[error("operation not supported for precomputed kernels: {0}")]
    Precomputed(&'static str),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// Model (de)serialization failure.
    #[error("model serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
