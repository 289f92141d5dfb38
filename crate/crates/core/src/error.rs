//! Error type shared by all modules.

use thiserror::Error;

/// Errors surfaced by the model builders, solvers and sweeps.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A physical quantity was outside its admissible domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A scenario violated one of its stated preconditions.
    #[error("invalid scenario: {0}")]
    ScenarioInvalid(String),

    /// Vector/matrix dimensions did not match the model in use.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Operation is not defined for the given model abstraction.
    #[error("unsupported for {model}: {what}")]
    Unsupported { model: &'static str, what: &'static str },

    /// Root finder exhausted its iteration budget.
    #[error("root finder did not converge after {iterations} iterations (last iterate {last} s)")]
    NonConvergence { last: f64, iterations: usize },

    /// Root finder hit a stationary point of the residual.
    #[error("singular derivative at t = {at} s")]
    SingularDerivative { at: f64 },

    /// Jordan-form cross-check could not produce a well-conditioned basis.
    #[error("jordan cross-check diagnostic failure: {0}")]
    JordanDiagnostic(String),

    /// Zone comparison over mismatching offset grids.
    #[error("offset grids differ: {0}")]
    GridMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
