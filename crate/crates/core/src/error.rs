use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A documented precondition was violated by the caller.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A symmetric matrix expected to be positive definite is not.
    #[error("matrix is not positive definite ({what}): pivot {pivot:e} at row {row}")]
    NotPositiveDefinite {
        what: &'static str,
        row: usize,
        pivot: f64,
    },

    /// Inverse iteration did not reach the residual tolerance.
    #[error("inverse iteration failed to converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    /// Y1 vanished during the integration of the fundamental system.
    #[error("conjugate point encountered near t = {at}: Y1 = {value:e}")]
    ConjugatePoint { at: f64, value: f64 },

    /// The transformed Robin constant is not positive.
    #[error("transformed boundary constant must be positive, got {0:e}")]
    NonPositiveRobin(f64),

    /// Power iteration stopped contracting.
    #[error("power iteration stagnated at step {step}: successive change {change:e}")]
    Stagnation { step: usize, change: f64 },

    /// A result failed an internal consistency check.
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
