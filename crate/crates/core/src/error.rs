use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid case: {}", .0.join("; "))]
    InvalidCase(Vec<String>),

    #[error(
        "Newton iteration did not converge after {iterations} iterations (residual {residual:e})"
    )]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("no exact equilibrium: reference-machine residual {residual:e} exceeds tolerance {tolerance:e}")]
    InconsistentPowerBalance { residual: f64, tolerance: f64 },

    #[error("singular Newton matrix at iteration {iteration}")]
    SingularStep { iteration: usize },

    #[error("non-uniform damping: ratio deviation {deviation:e} exceeds tolerance {tolerance:e}")]
    NonuniformDamping { deviation: f64, tolerance: f64 },

    #[error("Jacobian is not numerically diagonalizable: {0}")]
    NotDiagonalizable(String),

    #[error("eigenvalue classification failed: {real} real and {complex} non-real eigenvalues for m = {machines}")]
    ClassificationFailure {
        real: usize,
        complex: usize,
        machines: usize,
    },

    #[error("modal vector reconstructs to a non-real state (imaginary residual {residual:e}, norm {norm:e})")]
    NonRealReconstruction { residual: f64, norm: f64 },

    #[error("integration produced a non-finite state at t = {time}")]
    NonFinite { time: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("validation error: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
