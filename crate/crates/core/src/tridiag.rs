//! Thomas algorithm for tridiagonal systems.

use crate::error::{Error, Result};
use crate::real::Real;

/// Solves `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]` in place into `rhs`.
///
/// `lower[0]` and `upper[n-1]` are ignored. `scratch` must have length `n`.
pub fn solve<T: Real>(lower: &[T], diag: &[T], upper: &[T], rhs: &mut [T], scratch: &mut [T]) -> Result<()> {
    let n = diag.len();
    let tiny = T::min_positive_value();
    let mut beta = diag[0];
    if beta.abs() <= tiny {
        return Err(Error::Tridiagonal(0));
    }
    rhs[0] /= beta;
    for i in 1..n {
        scratch[i] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * scratch[i];
        if beta.abs() <= tiny || !beta.is_finite() {
            return Err(Error::Tridiagonal(i));
        }
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        let next = rhs[i + 1];
        rhs[i] -= scratch[i + 1] * next;
    }
    Ok(())
}
