//! Error types shared across the crate.

use crate::field::GridFunction;

/// Reason a nonlinear solve stopped without reaching tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveFailure {
    /// Iterate sup-norm exceeded the blow-up threshold (or became non-finite).
    Diverged,
    /// Progress stalled before the residual tolerance was met.
    Stagnated,
}

impl std::fmt::Display for SolveFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolveFailure::Diverged => write!(f, "diverged"),
            SolveFailure::Stagnated => write!(f, "stagnated"),
        }
    }
}

/// Payload of a failed solve: what happened, how far it got, last iterate.
#[derive(Debug, Clone)]
pub struct SolveBreakdown {
    pub failure: SolveFailure,
    pub iterations: usize,
    pub residual_norm: f64,
    pub last: GridFunction,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid problem specification: {0}")]
    InvalidSpec(String),

    #[error("incompatible fields: {0}")]
    IncompatibleFields(String),

    #[error("weight field must be strictly positive and finite: {0}")]
    InvalidWeight(String),

    #[error("field precondition violated: {0}")]
    InvalidField(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("linearization is singular or indefinite: {0}")]
    DegenerateLinearization(String),

    #[error("solver {} after {} iterations (residual {:.3e})",
            .0.failure, .0.iterations, .0.residual_norm)]
    Nonconvergence(Box<SolveBreakdown>),

    #[error("invalid obstacle: {0}")]
    InvalidObstacle(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn nonconvergence(
        failure: SolveFailure,
        iterations: usize,
        residual_norm: f64,
        last: GridFunction,
    ) -> Self {
        Error::Nonconvergence(Box::new(SolveBreakdown {
            failure,
            iterations,
            residual_norm,
            last,
        }))
    }

    /// Divergence is how a nonexistent solution manifests; callers that map
    /// solver outcomes to existence predicates need to tell it apart.
    pub fn is_divergence(&self) -> bool {
        matches!(self, Error::Nonconvergence(b) if b.failure == SolveFailure::Diverged)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
