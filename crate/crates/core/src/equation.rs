//! Equation kinds, ground states and nonlinearities.
//!
//! Both flows are written as `∂_t u = Δu + r^{-(D+2)} f(r^D u)` on `R^N`, `N = 2D + 2`.
//! For the harmonic map heat flow `f(v) = (D²/2)(2v - sin 2v)` and the ground state is
//! `Q = 2 arctan(r^D)`; for the critical heat equation `f(v) = |v|^{p-1} v` and the
//! ground state is the Aubin–Talenti profile.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{sphere_area, FieldKind, RadialField, RadialGrid, Stencil};
use crate::real::{lit, Real};

/// Which flow is being studied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EquationKind {
    /// D-equivariant harmonic map heat flow into the sphere, `D ≥ 3`.
    Hmhf { d: u32 },
    /// Radial energy-critical heat equation in `R^N`, `N ≥ 7`.
    Nlh { n: u32 },
}

impl fmt::Display for EquationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EquationKind::Hmhf { d } => write!(f, "hmhf(D={d})"),
            EquationKind::Nlh { n } => write!(f, "nlh(N={n})"),
        }
    }
}

/// `x - sin x`, accurate for small `x`.
fn x_minus_sin<T: Real>(x: T) -> T {
    if x.abs() < lit(0.1) {
        let x2 = x * x;
        let mut term = x * x2 / lit(6.0);
        let mut sum = term;
        for k in 2..8 {
            let k2 = lit::<T>((2 * k) as f64);
            term = -term * x2 / (k2 * (k2 + T::one()));
            sum += term;
        }
        sum
    } else {
        x - x.sin()
    }
}

/// `(1+x)^p - 1`, accurate for small `x`.
fn pow_m1<T: Real>(p: T, x: T) -> T {
    (p * x.ln_1p()).exp_m1()
}

/// `(1+x)^p - 1 - p x`, accurate for small `x`.
fn pow_rem<T: Real>(p: T, x: T) -> T {
    if x.abs() < lit(1e-3) {
        // p(p-1)/2 x² + p(p-1)(p-2)/6 x³ + p(p-1)(p-2)(p-3)/24 x⁴
        let c2 = p * (p - T::one()) / lit(2.0);
        let c3 = c2 * (p - lit(2.0)) / lit(3.0);
        let c4 = c3 * (p - lit(3.0)) / lit(4.0);
        x * x * (c2 + x * (c3 + x * c4))
    } else {
        pow_m1(p, x) - p * x
    }
}

impl EquationKind {
    pub fn hmhf(d: u32) -> Result<Self> {
        if d < 3 {
            return Err(Error::Parameter(format!("HMHF needs D >= 3, got {d}")));
        }
        Ok(EquationKind::Hmhf { d })
    }

    pub fn nlh(n: u32) -> Result<Self> {
        if n < 7 {
            return Err(Error::Parameter(format!("NLH needs N >= 7, got {n}")));
        }
        Ok(EquationKind::Nlh { n })
    }

    /// Spatial dimension `N = 2D + 2` of the u-picture.
    pub fn n(&self) -> u32 {
        match *self {
            EquationKind::Hmhf { d } => 2 * d + 2,
            EquationKind::Nlh { n } => n,
        }
    }

    pub fn n_real<T: Real>(&self) -> T {
        lit(self.n() as f64)
    }

    /// Equivariance index `D = (N - 2)/2` (half-integer for odd `N`).
    pub fn d<T: Real>(&self) -> T {
        lit((self.n() as f64 - 2.0) / 2.0)
    }

    /// Critical exponent `p = (N + 2)/(N - 2)`.
    pub fn p<T: Real>(&self) -> T {
        let n = self.n() as f64;
        lit((n + 2.0) / (n - 2.0))
    }

    pub fn is_hmhf(&self) -> bool {
        matches!(self, EquationKind::Hmhf { .. })
    }

    /// `W(0)`: 2 for HMHF, 1 for NLH.
    pub fn w0<T: Real>(&self) -> T {
        match self {
            EquationKind::Hmhf { .. } => lit(2.0),
            EquationKind::Nlh { .. } => T::one(),
        }
    }

    fn nlh_a<T: Real>(&self) -> T {
        let n = self.n() as f64;
        lit(n * (n - 2.0))
    }

    /// Ground state in the u-picture, `W(y)`.
    pub fn ground_u<T: Real>(&self, y: T) -> T {
        match self {
            EquationKind::Hmhf { .. } => {
                let x = y.powf(self.d());
                if x < lit(1e-8) {
                    lit::<T>(2.0) * (T::one() - x * x / lit(3.0))
                } else {
                    lit::<T>(2.0) * x.atan() / x
                }
            }
            EquationKind::Nlh { .. } => (T::one() + y * y / self.nlh_a()).powf(-self.d::<T>()),
        }
    }

    /// Ground state in the v-picture, `Q(y) = y^D W(y)`.
    pub fn ground_v<T: Real>(&self, y: T) -> T {
        match self {
            EquationKind::Hmhf { .. } => lit::<T>(2.0) * y.powf(self.d()).atan(),
            EquationKind::Nlh { .. } => y.powf(self.d()) * self.ground_u(y),
        }
    }

    /// Scaling generator applied to the ground state, `ΛW = (y ∂_y + D) W`.
    pub fn lambda_w<T: Real>(&self, y: T) -> T {
        let d = self.d::<T>();
        match self {
            EquationKind::Hmhf { .. } => {
                let x2 = y.powf(d + d);
                (d + d) / (T::one() + x2)
            }
            EquationKind::Nlh { n } => {
                let nn = lit::<T>(*n as f64);
                (d - y * y / (nn + nn)) * (T::one() + y * y / self.nlh_a()).powf(-nn / lit(2.0))
            }
        }
    }

    /// `∂_y ΛW`.
    pub fn d_lambda_w<T: Real>(&self, y: T) -> T {
        let d = self.d::<T>();
        match self {
            EquationKind::Hmhf { .. } => {
                let x2 = y.powf(d + d);
                let den = T::one() + x2;
                -lit::<T>(4.0) * d * d * x2 / (y * den * den)
            }
            EquationKind::Nlh { n } => {
                let nn = lit::<T>(*n as f64);
                let a = self.nlh_a::<T>();
                let base = T::one() + y * y / a;
                let half_n = nn / lit(2.0);
                -y / nn * base.powf(-half_n)
                    - (d - y * y / (nn + nn)) * half_n * (y + y) / a * base.powf(-half_n - T::one())
            }
        }
    }

    /// `ΛQ = y^D ΛW` (v-picture generator `y ∂_y Q`).
    pub fn lambda_q<T: Real>(&self, y: T) -> T {
        y.powf(self.d()) * self.lambda_w(y)
    }

    /// Zero of `ΛW` for NLH, `y* = √(N(N-2))`.
    pub fn lambda_w_zero<T: Real>(&self) -> Option<T> {
        match self {
            EquationKind::Hmhf { .. } => None,
            EquationKind::Nlh { .. } => Some(self.nlh_a::<T>().sqrt()),
        }
    }

    /// Linearized potential `y^{-2} f'(Q(y))`.
    pub fn potential<T: Real>(&self, y: T) -> T {
        match self {
            EquationKind::Hmhf { .. } => {
                let d = self.d::<T>();
                let x2 = y.powf(d + d);
                let den = T::one() + x2;
                lit::<T>(8.0) * d * d * y.powf(d + d - lit(2.0)) / (den * den)
            }
            EquationKind::Nlh { .. } => {
                let base = T::one() + y * y / self.nlh_a();
                self.p::<T>() / (base * base)
            }
        }
    }

    /// The nonlinearity `f(v)`.
    pub fn f<T: Real>(&self, v: T) -> T {
        match self {
            EquationKind::Hmhf { .. } => {
                let d = self.d::<T>();
                d * d / lit(2.0) * x_minus_sin(v + v)
            }
            EquationKind::Nlh { .. } => v.abs().powf(self.p::<T>() - T::one()) * v,
        }
    }

    /// `f'(v)`.
    pub fn f_prime<T: Real>(&self, v: T) -> T {
        match self {
            EquationKind::Hmhf { .. } => {
                let d = self.d::<T>();
                let s = v.sin();
                lit::<T>(2.0) * d * d * s * s
            }
            EquationKind::Nlh { .. } => {
                let p = self.p::<T>();
                p * v.abs().powf(p - T::one())
            }
        }
    }

    /// `r^{-(D+2)} f(r^D u)`, the nonlinearity in the u-picture.
    pub fn nonlinear_u<T: Real>(&self, r: T, u: T) -> T {
        match self {
            EquationKind::Hmhf { .. } => {
                let d = self.d::<T>();
                self.f(r.powf(d) * u) / r.powf(d + lit(2.0))
            }
            EquationKind::Nlh { .. } => self.f(u),
        }
    }

    /// `r^{-2} f'(r^D u)`.
    pub fn potential_u<T: Real>(&self, r: T, u: T) -> T {
        match self {
            EquationKind::Hmhf { .. } => self.f_prime(r.powf(self.d()) * u) / (r * r),
            EquationKind::Nlh { .. } => self.f_prime(u),
        }
    }

    /// `r^{-(D+2)} {f(a+b) - f(a) - f(b)}` for u-picture values `a`, `b`.
    pub fn interaction_u<T: Real>(&self, r: T, a: T, b: T) -> T {
        match self {
            EquationKind::Hmhf { .. } => {
                let d = self.d::<T>();
                let rd = r.powf(d);
                let (av, bv) = (rd * a, rd * b);
                lit::<T>(2.0) * d * d * (av + bv).sin() * av.sin() * bv.sin() / (rd * r * r)
            }
            EquationKind::Nlh { .. } => {
                let p = self.p::<T>();
                let (big, small) = if a.abs() >= b.abs() { (a, b) } else { (b, a) };
                if big == T::zero() {
                    return T::zero();
                }
                self.f(big) * pow_m1(p, small / big) - self.f(small)
            }
        }
    }

    /// `r^{-(D+2)} {f(a+b+c) - f(a+b) - f'(a) c}` for u-picture values.
    pub fn remainder_u<T: Real>(&self, r: T, a: T, b: T, c: T) -> T {
        match self {
            EquationKind::Hmhf { .. } => {
                let d = self.d::<T>();
                let rd = r.powf(d);
                let (av, bv, cv) = (rd * a, rd * b, rd * c);
                let s = av + bv;
                let half_c = cv / lit(2.0);
                let lin = cv * lit(2.0) * (av + s + half_c).sin() * (bv + half_c).sin();
                let cubic = (s + s + cv).cos() * x_minus_sin(cv);
                d * d * (lin + cubic) / (rd * r * r)
            }
            EquationKind::Nlh { .. } => {
                let p = self.p::<T>();
                let s = a + b;
                // f(s+c) - f(s) - f'(s)c
                let second = if c.abs() <= s.abs() && s != T::zero() {
                    self.f(s) * pow_rem(p, c / s)
                } else {
                    self.f(s + c) - self.f(s) - self.f_prime(s) * c
                };
                // (f'(s) - f'(a)) c
                let slope = if a != T::zero() && b.abs() <= a.abs() {
                    self.f_prime(a) * pow_m1(p - T::one(), b / a)
                } else {
                    self.f_prime(s) - self.f_prime(a)
                };
                second + slope * c
            }
        }
    }

    /// Energy of a state: v-type for HMHF, u-type for NLH.
    pub fn energy<T: Real>(&self, state: &RadialField<T>) -> Result<T> {
        let grid = state.grid();
        let vals = state.values();
        let dr = grid.d_dr(vals, Stencil::Fourth);
        match self {
            EquationKind::Hmhf { .. } => {
                state.expect_kind(FieldKind::V)?;
                let d = self.d::<T>();
                let dens: Vec<T> = grid
                    .nodes()
                    .iter()
                    .zip(vals.iter().zip(&dr))
                    .map(|(&r, (&v, &vr))| {
                        let s = v.sin();
                        lit::<T>(0.5) * (vr * vr + d * d * s * s / (r * r))
                    })
                    .collect();
                let e = lit::<T>(2.0) * T::PI() * grid.integral(&dens, lit(2.0));
                finite(e)
            }
            EquationKind::Nlh { .. } => {
                state.expect_kind(FieldKind::U)?;
                let p = self.p::<T>();
                let dens: Vec<T> = vals
                    .iter()
                    .zip(&dr)
                    .map(|(&u, &ur)| lit::<T>(0.5) * ur * ur - u.abs().powf(p + T::one()) / (p + T::one()))
                    .collect();
                let e = sphere_area::<T>(self.n()) * grid.integral(&dens, self.n_real());
                finite(e)
            }
        }
    }
}

fn finite<T: Real>(x: T) -> Result<T> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NonFinite("energy integrand".into()))
    }
}

/// The ground state sampled on a grid.
#[derive(Debug, Clone)]
pub struct GroundState<T: Real> {
    pub kind: EquationKind,
    /// `W`, u-type.
    pub w: RadialField<T>,
    /// `Q = r^D W`, v-type.
    pub q: RadialField<T>,
    /// `ΛW`, u-type.
    pub lambda_w: RadialField<T>,
}

impl<T: Real> GroundState<T> {
    /// Samples the ground state at scale `lambda` and sign `iota`.
    pub fn new(kind: EquationKind, grid: Arc<RadialGrid<T>>, lambda: T, iota: T) -> Result<Self> {
        let d = kind.d::<T>();
        let amp = iota * lambda.powf(-d);
        let w = RadialField::from_fn(grid.clone(), FieldKind::U, |r| amp * kind.ground_u(r / lambda))?;
        let q = RadialField::from_fn(grid.clone(), FieldKind::V, |r| iota * kind.ground_v(r / lambda))?;
        let lambda_w = RadialField::from_fn(grid, FieldKind::U, |r| amp * kind.lambda_w(r / lambda))?;
        Ok(Self { kind, w, q, lambda_w })
    }

    /// `ΔW + r^{-(D+2)} f(Q)` evaluated with the given stencil.
    pub fn static_residual(&self, stencil: Stencil) -> RadialField<T> {
        let grid = self.w.grid();
        let lap = grid.laplacian_values(self.w.values(), self.kind.n_real(), stencil);
        let vals = grid
            .nodes()
            .iter()
            .zip(lap)
            .zip(self.w.values())
            .map(|((&r, l), &u)| l + self.kind.nonlinear_u(r, u))
            .collect();
        RadialField::new(grid.clone(), vals, FieldKind::U).expect("finite residual")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{inner, norms_with};

    fn hm3() -> EquationKind {
        EquationKind::hmhf(3).unwrap()
    }

    fn nl8() -> EquationKind {
        EquationKind::nlh(8).unwrap()
    }

    #[test]
    fn exponent_identities() {
        for n in 7..=12 {
            let k = EquationKind::nlh(n).unwrap();
            let (p, d): (f64, f64) = (k.p(), k.d());
            assert!((p * d - (d + 2.0)).abs() < 1e-14);
            assert!(((p - 1.0) * d - 2.0).abs() < 1e-14);
        }
        assert!(EquationKind::hmhf(2).is_err());
        assert!(EquationKind::nlh(6).is_err());
    }

    #[test]
    fn nonlinearity_values() {
        let pi = std::f64::consts::PI;
        assert!((hm3().f(pi) - 9.0 * pi).abs() < 1e-12);
        assert!((nl8().f(1.0f64) - 1.0).abs() < 1e-15);
        assert!((nl8().f_prime(1.0f64) - 5.0 / 3.0).abs() < 1e-15);
        assert!((hm3().f_prime(pi / 2.0) - 18.0).abs() < 1e-12);
        // series branch agrees with the closed form
        let v = 0.049f64;
        let direct = 4.5 * (2.0 * v - (2.0 * v).sin());
        assert!((hm3().f(v) - direct).abs() < 1e-12 * direct.abs().max(1e-6));
    }

    #[test]
    fn lambda_q_is_d_sin_q() {
        let k = hm3();
        for i in 0..200 {
            let y = 10f64.powf(-3.0 + 6.0 * i as f64 / 199.0);
            let lq = k.lambda_q(y);
            let want = 3.0 * k.ground_v(y).sin();
            assert!((lq - want).abs() < 1e-12, "{y}: {lq} vs {want}");
        }
    }

    #[test]
    fn lambda_w_matches_finite_difference() {
        for k in [hm3(), nl8(), EquationKind::nlh(7).unwrap()] {
            let d: f64 = k.d();
            for &y in &[0.01, 0.3, 1.0, 2.5, 7.0, 40.0] {
                let e = 1e-5 * y;
                let dw = (k.ground_u(y + e) - k.ground_u(y - e)) / (2.0 * e);
                let want = y * dw + d * k.ground_u(y);
                assert!((k.lambda_w(y) - want).abs() < 1e-7 * (1.0 + want.abs()), "{k} {y}");
                let dl = (k.lambda_w(y + e) - k.lambda_w(y - e)) / (2.0 * e);
                assert!((k.d_lambda_w(y) - dl).abs() < 1e-6 * (1.0 + dl.abs()), "{k} {y}");
            }
        }
    }

    #[test]
    fn potential_matches_f_prime() {
        for k in [hm3(), nl8()] {
            for &y in &[0.05f64, 0.7, 3.0, 11.0] {
                let want = k.f_prime(k.ground_v(y)) / (y * y);
                assert!((k.potential(y) - want).abs() < 1e-12 * want.abs().max(1e-12));
            }
        }
    }

    #[test]
    fn interaction_and_remainder_agree_with_direct_forms() {
        for k in [hm3(), nl8()] {
            let d: f64 = k.d();
            for &(r, a, b, c) in &[(0.7, 1.3, -0.4, 0.2), (1.5, 0.2, 0.9, -0.3), (0.3, -2.0, 0.5, 0.05)] {
                let rd = f64::powf(r, d);
                let fu = |u: f64| k.f(rd * u) / (rd * r * r);
                let direct0 = fu(a + b) - fu(a) - fu(b);
                assert!((k.interaction_u(r, a, b) - direct0).abs() < 1e-9 * (1.0 + direct0.abs()));
                let direct1 = fu(a + b + c) - fu(a + b) - k.f_prime(rd * a) / (r * r) * c;
                assert!((k.remainder_u(r, a, b, c) - direct1).abs() < 1e-9 * (1.0 + direct1.abs()));
            }
        }
    }

    fn grid(m: usize) -> Arc<RadialGrid<f64>> {
        Arc::new(RadialGrid::log_uniform(1e-5, 1e5, m).unwrap())
    }

    #[test]
    fn harmonic_map_energy() {
        let k = hm3();
        let g = grid(3000);
        let q = GroundState::new(k, g.clone(), 1.0, 1.0).unwrap().q;
        let e = k.energy(&q).unwrap();
        let want = 4.0 * std::f64::consts::PI * 3.0;
        assert!((e - want).abs() / want < 1e-6, "{e} vs {want}");
        let q2 = GroundState::new(k, g.clone(), 0.2, 1.0).unwrap().q;
        let e2 = k.energy(&q2).unwrap();
        assert!((e2 - e).abs() / e < 1e-6);
        let zero = RadialField::zeros(g, FieldKind::V);
        assert_eq!(k.energy(&zero).unwrap(), 0.0);
    }

    #[test]
    fn ground_state_static_residual_is_second_order() {
        for k in [hm3(), nl8()] {
            let res = |m: usize| {
                let g = Arc::new(RadialGrid::log_uniform(1e-3f64, 1e3, m).unwrap());
                let gs = GroundState::new(k, g, 1.0, 1.0).unwrap();
                norms_with(&gs.static_residual(Stencil::Second), k.n(), Stencil::Second).unwrap().l2
            };
            let (a, b) = (res(400), res(800));
            let order = (a / b).log2();
            assert!(order >= 1.9, "{k}: order {order}");
        }
    }

    #[test]
    fn rescaling_preserves_h1_norm() {
        let k = nl8();
        let g = grid(3000);
        let w = GroundState::new(k, g.clone(), 1.0, 1.0).unwrap().w;
        let wl = w.rescale(0.1, 3.0).unwrap();
        let a = norms_with(&w, 8, Stencil::Fourth).unwrap().h1dot;
        let b = norms_with(&wl, 8, Stencil::Fourth).unwrap().h1dot;
        assert!((a - b).abs() / a < 1e-4, "{a} {b}");
        let id = w.rescale(1.0, 3.0).unwrap();
        for (x, y) in id.values().iter().zip(w.values()) {
            assert!((x - y).abs() < 1e-12);
        }
        let lw = GroundState::new(k, g.clone(), 1.0, 1.0).unwrap().lambda_w.rescale(0.1, 3.0).unwrap();
        let exact = GroundState::new(k, g, 0.1, 1.0).unwrap().lambda_w;
        for (x, y) in lw.values().iter().zip(exact.values()) {
            assert!((x - y).abs() < 1e-6 * (1.0 + y.abs()) * 1e3);
        }
    }

    #[test]
    fn zero_pairing() {
        let g = grid(500);
        let z = RadialField::zeros(g.clone(), FieldKind::U);
        let w = GroundState::new(nl8(), g, 1.0, 1.0).unwrap().w;
        assert_eq!(inner(&z, &w, 8).unwrap(), 0.0);
    }
}
