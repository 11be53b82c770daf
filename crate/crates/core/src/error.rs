use thiserror::Error;

/// Failure modes of the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("grid mismatch between fields")]
    GridMismatch,
    #[error("field kind mismatch: expected {expected}, found {found}")]
    KindMismatch { expected: &'static str, found: &'static str },
    #[error("scale {0} is outside the resolvable band of the grid")]
    ScaleResolution(f64),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("kernel continuation failed: Wronskian drift {0:e}")]
    Continuation(f64),
    #[error("right inverse requires orthogonal data: relative pairing {0:e}")]
    NotOrthogonal(f64),
    #[error("integral tail does not converge: {0}")]
    Tail(String),
    #[error("fixed-point map is not contracting at level {level}: deltas {deltas:?}")]
    NonContraction { level: usize, deltas: Vec<f64> },
    #[error("step size underflow at t = {0}")]
    StepUnderflow(f64),
    #[error("tridiagonal solve failed at row {0}")]
    Tridiagonal(usize),
    #[error("numerical blow-up of the scheme at t = {0}")]
    SchemeBlowUp(f64),
    #[error("Newton iteration diverged after {iters} iterations (residual {residual:e})")]
    NewtonDivergence { iters: usize, residual: f64 },
    #[error("scale collision: ratio {0} reached 1")]
    Collision(f64),
    #[error("degenerate discretization: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;
