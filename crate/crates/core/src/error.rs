use thiserror::Error;

/// Errors raised by assembly, linear and nonlinear solves, and the time loop.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("CG breakdown at iteration {iteration}: p'Ap = {curvature:e}")]
    Breakdown { iteration: usize, curvature: f64 },

    #[error("singular dense matrix (pivot {pivot})")]
    SingularMatrix { pivot: usize },

    #[error("solver `{method}` requires a Jacobian but the system does not provide one")]
    MissingJacobian { method: String },

    #[error("linear solve failed in outer iteration {iteration}: {source}")]
    LinearSolve { iteration: usize, source: Box<Error> },

    #[error("gating Newton iteration did not converge at node {node}")]
    GatingNonConvergence { node: usize },

    #[error("nonlinear solve failed at step {step}: {reason}")]
    StepFailure { step: usize, reason: String },

    #[error("time step {tau} exceeds the convexity bound {tau_max}")]
    TimestepBound { tau: f64, tau_max: f64 },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("schema error: missing column `{0}`")]
    MissingColumn(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
