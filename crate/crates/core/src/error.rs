//! Error type shared across the crate.

/// Convenience alias used by every fallible operation in this crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Failure classes surfaced by the toolkit.
///
/// The variants separate caller mistakes (`Argument`, `Validation`) from data
/// problems (`Parse`, `Infeasible`) and from numerical breakdowns that only
/// show up at runtime (`DegenerateFit`, `Numerical`).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed input text (CSV or model file), with a 1-based line number
    /// where that is meaningful.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Structurally well-formed input that violates a documented invariant
    /// (non-positive sample, duplicate epoch, non-stochastic matrix, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// A caller-supplied parameter is out of range or inconsistent.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// The data cannot support the requested fit (constant input, singular
    /// system, more states than distinct values, ...).
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    /// A computation produced non-finite values or lost all probability mass.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// The trace is too short (or otherwise unusable) for the requested
    /// simulation.
    #[error("infeasible trace: {0}")]
    Infeasible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}
