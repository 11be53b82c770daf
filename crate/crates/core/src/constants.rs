//! The interaction constant `κ`, the exponents `α_j`, the prefactors `β_j` and the exact
//! rates `λ_j^ex(t) = β_j L^{1+2α_j} t^{-α_j}`.

use crate::equation::EquationKind;
use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::quad;
use crate::real::{lit, Real};

/// `κ` from one-dimensional integrals of the explicit ground state.
///
/// NLH: `(N-2)/2 · W(0) ∫W^p y^{N-1} / ∫(ΛW)² y^{N-1}`.
/// HMHF: `-4 ∫(ΛQ)³ y^{D-1} / ∫(ΛQ)² y`.
pub fn kappa_explicit<T: Real>(kind: EquationKind) -> Result<T> {
    let tol = lit::<T>(1e-13);
    let n = kind.n_real::<T>();
    let d = kind.d::<T>();
    let nm1 = n - T::one();
    match kind {
        EquationKind::Hmhf { .. } => {
            let num = quad::integrate_half_line(|y: T| kind.lambda_q(y).powi(3) * y.powf(d - T::one()), tol)?;
            let den = quad::integrate_half_line(|y: T| kind.lambda_q(y).powi(2) * y, tol)?;
            Ok(-lit::<T>(4.0) * num / den)
        }
        EquationKind::Nlh { .. } => {
            let p = kind.p::<T>();
            let num = quad::integrate_half_line(|y: T| kind.ground_u(y).powf(p) * y.powf(nm1), tol)?;
            let den = quad::integrate_half_line(|y: T| kind.lambda_w(y).powi(2) * y.powf(nm1), tol)?;
            Ok((n - lit(2.0)) / lit(2.0) * kind.w0::<T>() * num / den)
        }
    }
}

/// `κ = -⟨y^{-2} f'(Q) W(0), ΛW⟩ / ‖ΛW‖²` evaluated with the grid quadrature.
pub fn kappa_unified<T: Real>(kind: EquationKind, grid: &RadialGrid<T>) -> Result<T> {
    let n = kind.n_real::<T>();
    let w0 = kind.w0::<T>();
    let weights = grid.weights(n);
    let lw: Vec<T> = grid.nodes().iter().map(|&y| kind.lambda_w(y)).collect();
    let num: Vec<T> = grid.nodes().iter().zip(&lw).map(|(&y, &l)| kind.potential(y) * w0 * l).collect();
    let den: Vec<T> = lw.iter().map(|&l| l * l).collect();
    let (a, b) = (grid.integral_with(&num, &weights, n), grid.integral_with(&den, &weights, n));
    let kappa = -a / b;
    if !kappa.is_finite() {
        return Err(Error::NonFinite("κ from the grid pairing".into()));
    }
    Ok(kappa)
}

/// Grid on which [`kappa_unified`] is resolved to better than `1e-8`.
pub fn kappa_grid<T: Real>() -> Result<RadialGrid<T>> {
    RadialGrid::log_uniform(lit(1e-8), lit(1e8), 4001)
}

/// `α_j = ½ (D/(D-2))^{j-1} - ½`.
pub fn alpha<T: Real>(kind: EquationKind, j: usize) -> T {
    let d = kind.d::<T>();
    let half = lit::<T>(0.5);
    half * (d / (d - lit(2.0))).powi(j as i32 - 1) - half
}

/// Universal constants of one equation for `J` bubbles and outer scale `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable<T> {
    pub kind: EquationKind,
    pub kappa: T,
    pub alphas: Vec<T>,
    pub betas: Vec<T>,
    pub scale: T,
}

/// Builds `α_j, β_j` for `j = 1..=J` with `β_j = (α_j β_{j-1}^D / |κ|)^{1/(D-2)}`.
pub fn rates<T: Real>(kind: EquationKind, kappa: T, bubbles: usize, scale: T) -> Result<RateTable<T>> {
    if bubbles == 0 {
        return Err(Error::Parameter("J must be at least 1".into()));
    }
    if !(scale > T::zero()) || !scale.is_finite() {
        return Err(Error::Parameter(format!("L must be positive, got {scale}")));
    }
    if kappa == T::zero() || !kappa.is_finite() {
        return Err(Error::Parameter("κ must be finite and nonzero".into()));
    }
    let d = kind.d::<T>();
    let alphas: Vec<T> = (1..=bubbles).map(|j| alpha(kind, j)).collect();
    let mut betas = vec![T::one()];
    for j in 1..bubbles {
        let prev = betas[j - 1];
        betas.push((alphas[j] * prev.powf(d) / kappa.abs()).powf(T::one() / (d - lit(2.0))));
    }
    Ok(RateTable { kind, kappa, alphas, betas, scale })
}

impl<T: Real> RateTable<T> {
    pub fn bubbles(&self) -> usize {
        self.alphas.len()
    }

    /// `λ_{j,L}^ex(t)` for 1-based `j`.
    pub fn lambda_ex(&self, j: usize, t: T) -> Result<T> {
        if !(t > T::zero()) {
            return Err(Error::Parameter(format!("time must be positive, got {t}")));
        }
        if j == 0 || j > self.bubbles() {
            return Err(Error::Parameter(format!("bubble index {j} outside 1..={}", self.bubbles())));
        }
        Ok(self.prefactor(j) * t.powf(-self.alphas[j - 1]))
    }

    /// `β_j L^{1+2α_j}`.
    pub fn prefactor(&self, j: usize) -> T {
        let a = self.alphas[j - 1];
        self.betas[j - 1] * self.scale.powf(T::one() + a + a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_values() {
        let h3 = EquationKind::hmhf(3).unwrap();
        let n7 = EquationKind::nlh(7).unwrap();
        assert_eq!(alpha::<f64>(h3, 1), 0.0);
        assert_eq!(alpha::<f64>(h3, 2), 1.0);
        assert_eq!(alpha::<f64>(h3, 3), 4.0);
        assert_eq!(alpha::<f64>(n7, 2), 2.0);
    }

    #[test]
    fn beta_two_for_d3_is_inverse_kappa() {
        let k = EquationKind::hmhf(3).unwrap();
        let t = rates(k, -9.5f64, 3, 1.0).unwrap();
        assert_eq!(t.betas[0], 1.0);
        assert!((t.betas[1] - 1.0 / 9.5).abs() < 1e-15);
    }

    #[test]
    fn first_rate_is_constant() {
        let t = rates(EquationKind::nlh(8).unwrap(), 7.0f64, 2, 3.0).unwrap();
        for &s in &[0.1, 1.0, 1e4] {
            assert_eq!(t.lambda_ex(1, s).unwrap(), 3.0);
        }
        assert!(t.lambda_ex(1, 0.0).is_err());
        assert!(t.lambda_ex(3, 1.0).is_err());
    }

    #[test]
    fn explicit_kappa_signs() {
        assert!(kappa_explicit::<f64>(EquationKind::hmhf(3).unwrap()).unwrap() < 0.0);
        assert!(kappa_explicit::<f64>(EquationKind::nlh(8).unwrap()).unwrap() > 0.0);
    }
}
