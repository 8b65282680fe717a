//! Error type shared by every module.

use thiserror::Error;

/// Errors raised by model evaluation, simulation and table handling.
#[derive(Debug, Error)]
pub enum Error {
    /// Operands or configuration disagree on the register length.
    #[error("length mismatch: expected {expected} bits, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    /// A probability argument lies outside `[0, 1]` or is not finite.
    #[error("invalid probability {0}")]
    InvalidProbability(f64),

    /// A parameter lies outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A statistic is undefined for the given inputs (for example a mean over zero runs).
    #[error("undefined statistic: {0}")]
    UndefinedStatistic(String),

    /// A requested target cannot be reached by the model.
    #[error("unattainable target: {0}")]
    Unattainable(String),

    /// The statevector would exceed the configured qubit cap.
    #[error("simulator cap exceeded: {requested} qubits requested, cap is {cap}")]
    CapExceeded { requested: usize, cap: usize },

    /// A cost table has no entry for the requested rotation level and error rate.
    #[error("cost table has no entry for M={m}, eta={eta:e}")]
    MissingCostEntry { m: u32, eta: f64 },

    /// A cost table failed schema validation.
    #[error("cost table schema error: {0}")]
    Schema(String),

    /// A cost table violates its monotonicity invariants.
    #[error("cost table monotonicity error: {0}")]
    Monotonicity(String),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_probability(p: f64) -> Result<()> {
    if p.is_finite() && (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidProbability(p))
    }
}
