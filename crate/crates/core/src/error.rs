use thiserror::Error;

/// Errors surfaced by the numerical core.
///
/// `InternalDefect` flags states that should be unreachable when the
/// documented invariants hold (e.g. a simulated volatility matrix leaving
/// the positive semidefinite cone by more than the admitted tolerance).
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric (max |m - m^T| entry = {max_asym:e})")]
    NotSymmetric { max_asym: f64 },

    #[error("matrix is not positive semidefinite: min eigenvalue {min_eig:e} < -{tol:e}")]
    NotPsd { min_eig: f64, tol: f64 },

    #[error("matrix is not positive definite: min eigenvalue {min_eig:e}")]
    NotPositiveDefinite { min_eig: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix exponential overflow: spectral norm {norm:e} exceeds 700")]
    ExpOverflow { norm: f64 },

    #[error("matrix is numerically non-diagonalizable: {reason}")]
    NotDiagonalizable { reason: String },

    #[error("spectrum of the mean-reversion matrix is not in the open left half-plane (max Re = {lambda:e})")]
    UnstableDrift { lambda: f64 },

    #[error("matrix is numerically singular (min/max singular value = {ratio:e})")]
    SingularMatrix { ratio: f64 },

    #[error("integrand returned a non-finite value at sample {index}")]
    NonFiniteIntegrand { index: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("Monte Carlo estimator too noisy for a verdict: relative stderr {rel_stderr:.3} exceeds 0.1")]
    EstimatorVariance { rel_stderr: f64 },

    #[error("internal defect: {0}")]
    InternalDefect(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
