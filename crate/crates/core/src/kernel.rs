//! The linearized operator `H = -Δ - y^{-2} f'(Q)`, its radial kernel and right inverses.
//!
//! `Γ₁ = ΛW` spans the regular kernel. The singular partner is built by reduction of
//! order, `Γ₂ = ΛW ∫₁^y dy' / (y'^{N-1} (ΛW)²)`, normalized so that
//! `y^{N-1}(Γ₁Γ₂' - Γ₂Γ₁') = 1`. For NLH, `ΛW` vanishes at `y* = √(N(N-2))`; there
//! `Γ₂` is continued by integrating `HΓ = 0` across the band `[0.8 y*, 1.2 y*]`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::equation::EquationKind;
use crate::error::{Error, Result};
use crate::grid::{gauss_legendre, sphere_area, FieldKind, RadialField, RadialGrid, Stencil};
use crate::ode::Dopri;
use crate::quad;
use crate::real::{lit, Real};

/// Maximum width in `ln y` of one Gauss–Legendre panel for the reduction-of-order integral.
const PANEL: f64 = 0.05;

#[derive(Debug, Clone, Copy)]
struct Band<T> {
    lo: T,
    hi: T,
    /// `∫₁^{lo} g`.
    i_lo: T,
    /// `Γ₂(hi)/ΛW(hi)`.
    c_hi: T,
}

/// Samples of `Γ₁, Γ₂` and their `y`-derivatives.
#[derive(Debug, Clone)]
pub struct KernelSamples<T> {
    pub y: Vec<T>,
    pub g1: Vec<T>,
    pub dg1: Vec<T>,
    pub g2: Vec<T>,
    pub dg2: Vec<T>,
}

impl<T: Real> KernelSamples<T> {
    /// `max |y^{N-1}(Γ₁Γ₂' - Γ₂Γ₁') - 1|` over the samples.
    pub fn wronskian_defect(&self, n: u32) -> T {
        let nm1 = lit::<T>(n as f64 - 1.0);
        (0..self.y.len())
            .map(|i| {
                let w = self.y[i].powf(nm1) * (self.g1[i] * self.dg2[i] - self.g2[i] * self.dg1[i]);
                (w - T::one()).abs()
            })
            .fold(T::zero(), T::max)
    }
}

/// The kernel pair `(Γ₁, Γ₂)` of `H` as evaluable functions of `y`.
#[derive(Debug, Clone)]
pub struct KernelPair<T: Real> {
    kind: EquationKind,
    band: Option<Band<T>>,
}

impl<T: Real> KernelPair<T> {
    /// Builds the pair; for NLH this integrates `HΓ₂ = 0` across `y*`.
    pub fn build(kind: EquationKind) -> Result<Self> {
        let band = match kind.lambda_w_zero::<T>() {
            None => None,
            Some(ystar) => {
                let lo = ystar * lit(0.8);
                let hi = ystar * lit(1.2);
                let g = |t: T| integrand(kind, t);
                let i_lo = quad::integrate(g, T::one(), lo, lit(1e-300), lit(1e-14))?;
                let mut pair = Self { kind, band: Some(Band { lo, hi, i_lo, c_hi: T::zero() }) };
                let (g2, dg2) = pair.continue_band(lo, hi)?;
                let nm1 = lit::<T>(kind.n() as f64 - 1.0);
                let w = hi.powf(nm1) * (kind.lambda_w(hi) * dg2 - g2 * kind.d_lambda_w(hi));
                let drift = (w - T::one()).abs();
                if drift > lit(1e-4) {
                    return Err(Error::Continuation(drift.as_f64()));
                }
                let c_hi = g2 / kind.lambda_w(hi);
                pair.band = Some(Band { lo, hi, i_lo, c_hi });
                Some(pair.band.unwrap())
            }
        };
        Ok(Self { kind, band })
    }

    pub fn kind(&self) -> EquationKind {
        self.kind
    }

    pub fn gamma1(&self, y: T) -> T {
        self.kind.lambda_w(y)
    }

    pub fn dgamma1(&self, y: T) -> T {
        self.kind.d_lambda_w(y)
    }

    /// Initial data of the band ODE at `lo`.
    fn band_start(&self, band: &Band<T>) -> (T, T) {
        let k = self.kind;
        let lo = band.lo;
        let lw = k.lambda_w(lo);
        let nm1 = lit::<T>(k.n() as f64 - 1.0);
        let g2 = lw * band.i_lo;
        let dg2 = k.d_lambda_w(lo) * band.i_lo + T::one() / (lo.powf(nm1) * lw);
        (g2, dg2)
    }

    /// Integrates `HΓ = 0` from `lo` to `y`, returning `(Γ₂, Γ₂')`.
    fn continue_band(&self, from: T, to: T) -> Result<(T, T)> {
        let band = self.band.expect("band present");
        let (g2, dg2) = self.band_start(&band);
        self.integrate_ode(from, &[g2, dg2], to)
    }

    fn integrate_ode(&self, from: T, state: &[T], to: T) -> Result<(T, T)> {
        if from == to {
            return Ok((state[0], state[1]));
        }
        let k = self.kind;
        let nm1 = lit::<T>(k.n() as f64 - 1.0);
        let solver = Dopri::new(lit(1e-13), lit(1e-300));
        let (_, y) = solver.run(
            |y, s: &[T], ds: &mut [T]| {
                ds[0] = s[1];
                ds[1] = -nm1 / y * s[1] - k.potential(y) * s[0];
            },
            from,
            state,
            to,
            (to - from) * lit(1e-3),
            |_, _| true,
        )?;
        Ok((y[0], y[1]))
    }

    /// Evaluates `Γ₁, Γ₁', Γ₂, Γ₂'` at ascending points `ys`.
    pub fn sample(&self, ys: &[T]) -> Result<KernelSamples<T>> {
        if ys.windows(2).any(|w| !(w[0] < w[1])) || ys.iter().any(|&y| !(y > T::zero())) {
            return Err(Error::Parameter("kernel sample points must be positive and ascending".into()));
        }
        let k = self.kind;
        let m = ys.len();
        let nm1 = lit::<T>(k.n() as f64 - 1.0);
        let g1: Vec<T> = ys.iter().map(|&y| k.lambda_w(y)).collect();
        let dg1: Vec<T> = ys.iter().map(|&y| k.d_lambda_w(y)).collect();
        let mut g2 = vec![T::zero(); m];
        let mut dg2 = vec![T::zero(); m];
        match self.band {
            None => {
                let d = k.d::<T>();
                for i in 0..m {
                    let y = ys[i];
                    let int = hmhf_reduction_integral(d, y);
                    g2[i] = hmhf_gamma2(d, y);
                    dg2[i] = dg1[i] * int + T::one() / (y.powf(nm1) * g1[i]);
                }
            }
            Some(band) => {
                let left: Vec<usize> = (0..m).filter(|&i| ys[i] < band.lo).collect();
                let mid: Vec<usize> = (0..m).filter(|&i| ys[i] >= band.lo && ys[i] <= band.hi).collect();
                let right: Vec<usize> = (0..m).filter(|&i| ys[i] > band.hi).collect();
                let g = |t: T| integrand(k, t);
                let lp: Vec<T> = left.iter().map(|&i| ys[i]).collect();
                let il = integrals_from(&g, T::one(), &lp);
                for (j, &i) in left.iter().enumerate() {
                    g2[i] = g1[i] * il[j];
                    dg2[i] = dg1[i] * il[j] + T::one() / (ys[i].powf(nm1) * g1[i]);
                }
                let (mut y_prev, start) = (band.lo, self.band_start(&band));
                let mut state = [start.0, start.1];
                for &i in &mid {
                    let (a, b) = self.integrate_ode(y_prev, &state, ys[i])?;
                    state = [a, b];
                    y_prev = ys[i];
                    g2[i] = a;
                    dg2[i] = b;
                }
                let rp: Vec<T> = right.iter().map(|&i| ys[i]).collect();
                let ir = integrals_from(&g, band.hi, &rp);
                for (j, &i) in right.iter().enumerate() {
                    let c = band.c_hi + ir[j];
                    g2[i] = g1[i] * c;
                    dg2[i] = dg1[i] * c + T::one() / (ys[i].powf(nm1) * g1[i]);
                }
            }
        }
        Ok(KernelSamples { y: ys.to_vec(), g1, dg1, g2, dg2 })
    }

    /// Kernel samples at `r_i / λ` for every node of `grid`.
    pub fn scaled(&self, grid: &RadialGrid<T>, lambda: T) -> Result<ScaledKernel<T>> {
        let ys: Vec<T> = grid.nodes().iter().map(|&r| r / lambda).collect();
        let samples = self.sample(&ys)?;
        let potential = ys.iter().map(|&y| self.kind.potential(y) / (lambda * lambda)).collect();
        Ok(ScaledKernel { kind: self.kind, lambda, samples, potential })
    }
}

/// `g(t) = 1/(t^{N-1} ΛW(t)²)`.
fn integrand<T: Real>(kind: EquationKind, t: T) -> T {
    let lw = kind.lambda_w(t);
    T::one() / (t.powf(lit(kind.n() as f64 - 1.0)) * lw * lw)
}

/// `∫₁^y g` for HMHF in closed form: `(y^{2D} - y^{-2D} + 4D ln y)/(8D³)`.
fn hmhf_reduction_integral<T: Real>(d: T, y: T) -> T {
    let x = y.powf(d + d);
    (x - T::one() / x + lit::<T>(4.0) * d * y.ln()) / (lit::<T>(8.0) * d * d * d)
}

/// `Γ₂` for HMHF, arranged to avoid overflow at large `y`.
fn hmhf_gamma2<T: Real>(d: T, y: T) -> T {
    let x = y.powf(d + d);
    let c = (d + d) / (lit::<T>(8.0) * d * d * d);
    if y > T::one() {
        let xi = T::one() / x;
        c * (T::one() - xi * xi + lit::<T>(4.0) * d * y.ln() * xi) / (T::one() + xi)
    } else {
        c * (x - T::one() / x + lit::<T>(4.0) * d * y.ln()) / (T::one() + x)
    }
}

/// `∫_{anchor}^{y} g` at each of the ascending points, in `ln y` panels.
fn integrals_from<T: Real>(g: &impl Fn(T) -> T, anchor: T, ys: &[T]) -> Vec<T> {
    let seg = |a: T, b: T| -> T {
        let (sa, sb) = (a.ln(), b.ln());
        let pieces = ((sb - sa).abs() / lit(PANEL)).ceil().to_usize().unwrap_or(1).max(1);
        gauss_legendre(sa, sb, pieces, |s| {
            let t = s.exp();
            g(t) * t
        })
    };
    let m = ys.len();
    let mut out = vec![T::zero(); m];
    let split = ys.iter().position(|&y| y >= anchor).unwrap_or(m);
    let mut acc = T::zero();
    let mut prev = anchor;
    for i in split..m {
        acc += seg(prev, ys[i]);
        prev = ys[i];
        out[i] = acc;
    }
    acc = T::zero();
    prev = anchor;
    for i in (0..split).rev() {
        acc += seg(prev, ys[i]);
        prev = ys[i];
        out[i] = acc;
    }
    out
}

/// Which formula the right inverse uses for the `Γ₂` coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InverseMode {
    /// `∫₀^y Γ₁F`: valid for any admissible `F`.
    General,
    /// `-∫_y^∞ Γ₁F`: requires `⟨F, ΛW⟩ = 0`, and then decays at infinity.
    Orthogonal,
}

/// Kernel data sampled on a grid at scale `λ`, reusable across many inversions.
#[derive(Debug, Clone)]
pub struct ScaledKernel<T> {
    kind: EquationKind,
    lambda: T,
    samples: KernelSamples<T>,
    potential: Vec<T>,
}

impl<T: Real> ScaledKernel<T> {
    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn samples(&self) -> &KernelSamples<T> {
        &self.samples
    }

    /// `r^{-2} f'(Q_λ(r))` at the nodes.
    pub fn potential(&self) -> &[T] {
        &self.potential
    }

    /// `[ᵒᵘᵗH⁻¹ F]` at scale `λ`: solves `H_λ u = F` by variation of constants.
    pub fn invert(&self, grid: &RadialGrid<T>, f: &[T], mode: InverseMode) -> Result<Vec<T>> {
        let m = grid.len();
        if f.len() != m || self.samples.y.len() != m {
            return Err(Error::GridMismatch);
        }
        let k = self.kind;
        let n = k.n_real::<T>();
        let s = &self.samples;
        let rn: Vec<T> = (0..m).map(|i| (n * grid.s(i)).exp()).collect();
        let a: Vec<T> = (0..m).map(|i| s.g2[i] * f[i] * rn[i]).collect();
        let b: Vec<T> = (0..m).map(|i| s.g1[i] * f[i] * rn[i]).collect();
        let h = grid.h();
        let tail_lo = |v: &[T]| -> Result<T> {
            lower_tail(v[0], v[1], h).ok_or_else(|| Error::Tail("integrand does not decay toward r = 0".into()))
        };
        let ca = grid.cumulative(&a);
        let a0 = tail_lo(&a)?;
        let cb = grid.cumulative(&b);
        let b0 = tail_lo(&b)?;
        let scale = self.lambda.powf(-(k.d::<T>() * lit(2.0)));
        let mut u = vec![T::zero(); m];
        match mode {
            InverseMode::General => {
                for i in 0..m {
                    u[i] = scale * (s.g1[i] * (a0 + ca[i]) - s.g2[i] * (b0 + cb[i]));
                }
            }
            InverseMode::Orthogonal => {
                let b_hi = upper_tail(b[m - 1], b[m - 2], h)
                    .ok_or_else(|| Error::Tail("Γ₁F does not decay at r_max".into()))?;
                let pairing = grid.integral(&b.iter().zip(&rn).map(|(&x, &r)| x / r).collect::<Vec<_>>(), n);
                let fn2 = grid.integral(&f.iter().map(|&x| x * x).collect::<Vec<_>>(), n);
                let gn2 = grid.integral(&s.g1.iter().map(|&x| x * x).collect::<Vec<_>>(), n);
                let rel = pairing.abs() / (fn2 * gn2).sqrt().max(T::min_positive_value());
                if rel > lit(1e-8) {
                    return Err(Error::NotOrthogonal(rel.as_f64()));
                }
                let total = cb[m - 1];
                for i in 0..m {
                    let coef = if s.y[i] >= T::one() { total - cb[i] + b_hi } else { -(b0 + cb[i]) };
                    u[i] = scale * (s.g1[i] * (a0 + ca[i]) + s.g2[i] * coef);
                }
            }
        }
        if let Some(i) = u.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("right inverse at node {i}")));
        }
        Ok(u)
    }
}

fn lower_tail<T: Real>(edge: T, inner: T, h: T) -> Option<T> {
    if edge == T::zero() || inner == T::zero() || (edge > T::zero()) != (inner > T::zero()) {
        return Some(T::zero());
    }
    let rate = (inner / edge).ln() / h;
    (rate > lit(0.25)).then(|| edge / rate)
}

fn upper_tail<T: Real>(edge: T, inner: T, h: T) -> Option<T> {
    lower_tail(edge, inner, h)
}

/// `-Δg - r^{-2} f'(Q_λ) g` with the analytic potential.
pub fn apply_h<T: Real>(g: &RadialField<T>, kind: EquationKind, lambda: T, stencil: Stencil) -> Result<RadialField<T>> {
    apply_h_multi(g, kind, &[lambda], stencil)
}

/// `H_{λ⃗} g = -Δg - r^{-2} Σ_j f'(Q_{λ_j}) g`.
pub fn apply_h_multi<T: Real>(
    g: &RadialField<T>,
    kind: EquationKind,
    lambdas: &[T],
    stencil: Stencil,
) -> Result<RadialField<T>> {
    g.expect_kind(FieldKind::U)?;
    let grid = g.grid();
    let lap = grid.laplacian_values(g.values(), kind.n_real(), stencil);
    let vals = grid
        .nodes()
        .iter()
        .zip(lap)
        .zip(g.values())
        .map(|((&r, l), &v)| {
            let pot: T = lambdas.iter().map(|&lam| kind.potential(r / lam) / (lam * lam)).sum();
            -l - pot * v
        })
        .collect();
    RadialField::new(grid.clone(), vals, FieldKind::U)
}

/// `ᵒᵘᵗH_λ⁻¹ F` for a u-type field.
pub fn right_inverse<T: Real>(
    f: &RadialField<T>,
    kernel: &KernelPair<T>,
    lambda: T,
    mode: InverseMode,
) -> Result<RadialField<T>> {
    f.expect_kind(FieldKind::U)?;
    let grid = f.grid();
    let scaled = kernel.scaled(grid, lambda)?;
    let u = scaled.invert(grid, f.values(), mode)?;
    RadialField::new(grid.clone(), u, FieldKind::U)
}

/// Smallest `‖H_{λ⃗} g‖ / ‖g‖_{Ḣ²}` over a Gaussian basis in `ln r` made orthogonal to
/// every `Z_{λ_k}`.
///
/// `z_at(r)` evaluates the unscaled profile `Z`.
pub fn coercivity_diagnostic<T: Real>(
    kind: EquationKind,
    grid: &std::sync::Arc<RadialGrid<T>>,
    z_at: impl Fn(T) -> T,
    lambdas: &[T],
    basis_size: usize,
) -> Result<T> {
    let lo = lambdas.iter().cloned().fold(T::infinity(), T::min).ln() - lit(4.0);
    let hi = lambdas.iter().cloned().fold(T::zero(), T::max).ln() + lit(4.0);
    let k = basis_size.max(4);
    let step = (hi - lo) / lit((k - 1) as f64);
    let width = step * lit(1.2);
    let mut basis = Vec::with_capacity(k);
    for j in 0..k {
        let c = lo + step * lit(j as f64);
        basis.push(RadialField::from_fn(grid.clone(), FieldKind::U, |r| {
            let x = (r.ln() - c) / width;
            (-(x * x) / lit(2.0)).exp()
        })?);
    }
    let projected = project_off(kind, grid, &z_at, lambdas, basis)?;
    rayleigh_minimum(kind, lambdas, &projected)
}

/// Removes `ΛW_{λ_j}` components so that `⟨g, Z_{λ_k}⟩ = 0` for all `k`.
pub fn project_off<T: Real>(
    kind: EquationKind,
    grid: &std::sync::Arc<RadialGrid<T>>,
    z_at: &impl Fn(T) -> T,
    lambdas: &[T],
    fields: Vec<RadialField<T>>,
) -> Result<Vec<RadialField<T>>> {
    let d = kind.d::<T>();
    let n = kind.n();
    let zs: Vec<RadialField<T>> = lambdas
        .iter()
        .map(|&lam| RadialField::from_fn(grid.clone(), FieldKind::U, |r| lam.powf(-d) * z_at(r / lam)))
        .collect::<Result<_>>()?;
    let lws: Vec<RadialField<T>> = lambdas
        .iter()
        .map(|&lam| RadialField::from_fn(grid.clone(), FieldKind::U, |r| lam.powf(-d) * kind.lambda_w(r / lam)))
        .collect::<Result<_>>()?;
    let j = lambdas.len();
    let mut mat = DMatrix::<f64>::zeros(j, j);
    for a in 0..j {
        for b in 0..j {
            mat[(a, b)] = crate::grid::inner(&lws[b], &zs[a], n)?.as_f64();
        }
    }
    let lu = mat.lu();
    let mut out = Vec::with_capacity(fields.len());
    for g in fields {
        let rhs = nalgebra::DVector::from_iterator(
            j,
            zs.iter().map(|z| crate::grid::inner(&g, z, n).map(|v| v.as_f64()).unwrap_or(f64::NAN)),
        );
        let c = lu.solve(&rhs).ok_or_else(|| Error::Degenerate("singular ⟨ΛW, Z⟩ matrix".into()))?;
        let mut h = g;
        for (b, lw) in lws.iter().enumerate() {
            h = h.sub(&lw.scaled(lit(c[b])))?;
        }
        out.push(h);
    }
    Ok(out)
}

/// Minimum of `‖H_{λ⃗} g‖² / ‖Δg‖²` over the span of `fields`, square-rooted.
pub fn rayleigh_minimum<T: Real>(kind: EquationKind, lambdas: &[T], fields: &[RadialField<T>]) -> Result<T> {
    let n = kind.n();
    let k = fields.len();
    let grid = fields[0].grid();
    let c = sphere_area::<T>(n).as_f64();
    let w = grid.weights(kind.n_real());
    let hs: Vec<Vec<T>> = fields
        .iter()
        .map(|g| apply_h_multi(g, kind, lambdas, Stencil::Fourth).map(|f| f.into_values()))
        .collect::<Result<_>>()?;
    let ls: Vec<Vec<T>> =
        fields.iter().map(|g| grid.laplacian_values(g.values(), kind.n_real(), Stencil::Fourth)).collect();
    let gram = |v: &[Vec<T>]| {
        let mut m = DMatrix::<f64>::zeros(k, k);
        for a in 0..k {
            for b in a..k {
                let s: f64 = (0..w.len()).map(|i| (v[a][i] * v[b][i] * w[i]).as_f64()).sum::<f64>() * c;
                m[(a, b)] = s;
                m[(b, a)] = s;
            }
        }
        m
    };
    let a = gram(&hs);
    let b = gram(&ls);
    let chol =
        b.clone().cholesky().ok_or_else(|| Error::Degenerate("Ḣ² Gram matrix is not positive definite".into()))?;
    let l = chol.l();
    let linv = l.clone().try_inverse().ok_or_else(|| Error::Degenerate("singular Cholesky factor".into()))?;
    let cmat = &linv * a * linv.transpose();
    let sym = (&cmat + cmat.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(lit::<T>(min.max(0.0).sqrt()))
}

/// Pointwise kernel bound constants: the largest `|y^k ∂_y^k Γ| / envelope` over the samples,
/// for `k = 0, 1, 2`, with envelopes `min(1, y^{-(N-2)})` for `Γ₁` and `max(y^{-(N-2)}, 1)`
/// for `Γ₂`.
pub fn kernel_bound_constants<T: Real>(kind: EquationKind, s: &KernelSamples<T>) -> [[T; 3]; 2] {
    let nm2 = lit::<T>(kind.n() as f64 - 2.0);
    let nm1 = nm2 + T::one();
    let mut out = [[T::zero(); 3]; 2];
    for i in 0..s.y.len() {
        let y = s.y[i];
        let pw = y.powf(-nm2);
        let env1 = T::one().min(pw);
        let env2 = T::one().max(pw);
        let pot = kind.potential(y);
        let d2 = |g: T, dg: T| -nm1 / y * dg - pot * g;
        let v1 = [s.g1[i].abs(), (y * s.dg1[i]).abs(), (y * y * d2(s.g1[i], s.dg1[i])).abs()];
        let v2 = [s.g2[i].abs(), (y * s.dg2[i]).abs(), (y * y * d2(s.g2[i], s.dg2[i])).abs()];
        for k in 0..3 {
            out[0][k] = out[0][k].max(v1[k] / env1);
            out[1][k] = out[1][k].max(v2[k] / env2);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn kinds() -> Vec<EquationKind> {
        vec![
            EquationKind::hmhf(3).unwrap(),
            EquationKind::hmhf(4).unwrap(),
            EquationKind::nlh(7).unwrap(),
            EquationKind::nlh(8).unwrap(),
            EquationKind::nlh(9).unwrap(),
        ]
    }

    #[test]
    fn gamma2_vanishes_at_one() {
        for k in kinds() {
            let kp = KernelPair::<f64>::build(k).unwrap();
            let s = kp.sample(&[0.5, 1.0, 2.0]).unwrap();
            assert!(s.g2[1].abs() < 1e-14, "{k}");
        }
    }

    #[test]
    fn wronskian_is_one_including_across_the_zero() {
        for k in kinds() {
            let kp = KernelPair::<f64>::build(k).unwrap();
            let mut ys: Vec<f64> = (0..400).map(|i| 10f64.powf(-2.0 + 4.0 * i as f64 / 399.0)).collect();
            if let Some(ystar) = k.lambda_w_zero::<f64>() {
                ys.push(ystar - 0.1);
                ys.push(ystar);
                ys.push(ystar + 0.1);
                ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
                ys.dedup();
            }
            let s = kp.sample(&ys).unwrap();
            let defect = s.wronskian_defect(k.n());
            assert!(defect < 1e-9, "{k}: {defect}");
        }
    }

    #[test]
    fn hmhf_gamma2_matches_reduction_of_order_quadrature() {
        let k = EquationKind::hmhf(3).unwrap();
        let kp = KernelPair::<f64>::build(k).unwrap();
        for &y in &[0.05, 0.4, 2.0, 9.0] {
            let int = quad::integrate(|t: f64| integrand(k, t), 1.0, y, 1e-300, 1e-13).unwrap();
            let want = k.lambda_w(y) * int;
            let got = kp.sample(&[y]).unwrap().g2[0];
            assert!((got - want).abs() < 1e-10 * want.abs().max(1.0), "{y}: {got} vs {want}");
        }
    }

    #[test]
    fn h_annihilates_lambda_w() {
        for k in kinds() {
            let g = Arc::new(RadialGrid::log_uniform(1e-3, 1e3, 2000).unwrap());
            let d: f64 = k.d();
            let lw = RadialField::from_fn(g.clone(), FieldKind::U, |r| k.lambda_w(r)).unwrap();
            let h = apply_h(&lw, k, 1.0, Stencil::Fourth).unwrap();
            let lap = g.laplacian_values(lw.values(), k.n_real(), Stencil::Fourth);
            let scale: f64 = lap.iter().fold(0.0, |a: f64, &b: &f64| a.max(b.abs()));
            let worst = g
                .nodes()
                .iter()
                .zip(h.values())
                .filter(|(&r, _)| (1e-2..=1e2).contains(&r))
                .fold(0.0f64, |a, (_, &b)| a.max(b.abs()));
            assert!(worst < 1e-6 * scale, "{k}: {worst} vs {scale}, d={d}");
        }
    }

    #[test]
    fn right_inverse_of_zero_is_zero() {
        let k = EquationKind::nlh(8).unwrap();
        let g = Arc::new(RadialGrid::log_uniform(1e-3, 1e3, 500).unwrap());
        let kp = KernelPair::<f64>::build(k).unwrap();
        let z = RadialField::zeros(g, FieldKind::U);
        for mode in [InverseMode::General, InverseMode::Orthogonal] {
            let u = right_inverse(&z, &kp, 1.0, mode).unwrap();
            assert!(u.values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn orthogonal_mode_rejects_non_orthogonal_data() {
        let k = EquationKind::hmhf(3).unwrap();
        let g = Arc::new(RadialGrid::log_uniform(1e-3, 1e3, 800).unwrap());
        let kp = KernelPair::<f64>::build(k).unwrap();
        let f = RadialField::from_fn(g, FieldKind::U, |r: f64| (-(r.ln()).powi(2)).exp()).unwrap();
        assert!(matches!(right_inverse(&f, &kp, 1.0, InverseMode::Orthogonal), Err(Error::NotOrthogonal(_))));
    }
}
