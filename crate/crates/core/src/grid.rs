//! Log-uniform radial grids, sampled fields, quadrature and finite-difference stencils.
//!
//! All stencils work in the logarithmic variable `s = ln r`, in which the radial
//! Laplacian reads `e^{-2s} (∂_ss + (n - 2) ∂_s)` and the measure `r^{n-1} dr` becomes
//! `e^{n s} ds`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::real::{lit, Real};

/// Gauss–Legendre nodes and weights on `[-1, 1]`, eight points.
const GL8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
];

/// Integrates `g` over `[a, b]` with composite eight-point Gauss–Legendre on `pieces` panels.
pub fn gauss_legendre<T: Real>(a: T, b: T, pieces: usize, g: impl Fn(T) -> T) -> T {
    let pieces = pieces.max(1);
    let width = (b - a) / lit::<T>(pieces as f64);
    let half = width * lit(0.5);
    let mut total = T::zero();
    for k in 0..pieces {
        let mid = a + width * (lit::<T>(k as f64) + lit(0.5));
        let mut panel = T::zero();
        for &(x, w) in GL8.iter() {
            panel += lit::<T>(w) * g(mid + half * lit(x));
        }
        total += panel * half;
    }
    total
}

/// Finite-difference accuracy of a stencil in the log variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stencil {
    /// Three-point centered stencil; one-sided second order at the ends.
    Second,
    /// Five-point centered stencil; falls back to [`Stencil::Second`] near the ends.
    Fourth,
}

/// Log-uniform mesh `r_i = r_min e^{i h}`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid<T: Real> {
    nodes: Vec<T>,
    s_min: T,
    h: T,
}

impl<T: Real> RadialGrid<T> {
    /// Builds `m` log-uniform nodes spanning `[r_min, r_max]`.
    pub fn log_uniform(r_min: T, r_max: T, m: usize) -> Result<Self> {
        if !(r_min > T::zero()) || !(r_max > r_min) || !r_max.is_finite() {
            return Err(Error::Parameter(format!("need 0 < r_min < r_max, got r_min = {r_min}, r_max = {r_max}")));
        }
        if r_max / r_min < lit(1e4 * (1.0 - 1e-12)) {
            return Err(Error::Parameter(format!("r_max / r_min must be at least 1e4, got {}", r_max / r_min)));
        }
        if m < 7 {
            return Err(Error::Parameter(format!("need at least 7 nodes, got {m}")));
        }
        let s_min = r_min.ln();
        let h = (r_max.ln() - s_min) / lit::<T>((m - 1) as f64);
        let mut nodes: Vec<T> = (0..m).map(|i| (s_min + h * lit::<T>(i as f64)).exp()).collect();
        nodes[0] = r_min;
        nodes[m - 1] = r_max;
        Ok(Self { nodes, s_min, h })
    }

    /// Grid with `per_unit` nodes per unit of `ln r`, rounded up.
    pub fn with_density(r_min: T, r_max: T, per_unit: T) -> Result<Self> {
        let span = (r_max / r_min).ln();
        let m = (span * per_unit).ceil().to_usize().unwrap_or(0) + 1;
        Self::log_uniform(r_min, r_max, m)
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Step in `s = ln r`.
    pub fn h(&self) -> T {
        self.h
    }

    pub fn r_min(&self) -> T {
        self.nodes[0]
    }

    pub fn r_max(&self) -> T {
        self.nodes[self.nodes.len() - 1]
    }

    /// Log coordinate of node `i`.
    pub fn s(&self, i: usize) -> T {
        self.s_min + self.h * lit::<T>(i as f64)
    }

    /// Fractional node index of radius `r`.
    pub fn position(&self, r: T) -> T {
        (r.ln() - self.s_min) / self.h
    }

    /// Product-integration weights for `∫_{r_min}^{r_max} f r^{n-1} dr`.
    ///
    /// `f` is interpolated by piecewise quadratics in `s` and the factor `e^{n s}` is
    /// integrated exactly, so constants are integrated to round-off.
    pub fn weights(&self, n: T) -> Vec<T> {
        let m = self.nodes.len();
        let h = self.h;
        let pieces = ((n.abs() * h * lit(2.0)).to_f64().unwrap_or(1.0) * 4.0).ceil() as usize + 1;
        // Base moments on a two-interval panel starting at t = 0.
        let l0 = |t: T| (t - h) * (t - h - h) / (h * h * lit(2.0));
        let l1 = |t: T| -t * (t - h - h) / (h * h);
        let l2 = |t: T| t * (t - h) / (h * h * lit(2.0));
        let e = |t: T| (n * t).exp();
        let two_h = h + h;
        let panel = [
            gauss_legendre(T::zero(), two_h, pieces, |t| l0(t) * e(t)),
            gauss_legendre(T::zero(), two_h, pieces, |t| l1(t) * e(t)),
            gauss_legendre(T::zero(), two_h, pieces, |t| l2(t) * e(t)),
        ];
        // Last single interval [h, 2h] of a panel anchored two nodes back.
        let tail = [
            gauss_legendre(h, two_h, pieces, |t| l0(t) * e(t)),
            gauss_legendre(h, two_h, pieces, |t| l1(t) * e(t)),
            gauss_legendre(h, two_h, pieces, |t| l2(t) * e(t)),
        ];
        let mut w = vec![T::zero(); m];
        let intervals = m - 1;
        let full_panels = intervals / 2;
        for k in 0..full_panels {
            let a = 2 * k;
            let scale = (n * self.s(a)).exp();
            for j in 0..3 {
                w[a + j] += panel[j] * scale;
            }
        }
        if intervals % 2 == 1 {
            let a = m - 3;
            let scale = (n * self.s(a)).exp();
            for j in 0..3 {
                w[a + j] += tail[j] * scale;
            }
        }
        w
    }

    /// `∫ f r^{n-1} dr` over `(0, ∞)` from node samples, with power-law tails outside the grid.
    pub fn integral(&self, values: &[T], n: T) -> T {
        let w = self.weights(n);
        self.integral_with(values, &w, n)
    }

    /// Same as [`RadialGrid::integral`] with precomputed weights.
    pub fn integral_with(&self, values: &[T], weights: &[T], n: T) -> T {
        let body: T = values.iter().zip(weights).map(|(&v, &w)| v * w).sum();
        let (lo, hi) = self.tails(values, n);
        body + lo.unwrap_or_else(T::zero) + hi.unwrap_or_else(T::zero)
    }

    /// Power-law tail estimates `(∫_0^{r_min}, ∫_{r_max}^∞)` of `f r^{n-1} dr`.
    ///
    /// `None` marks a tail whose local exponent does not decay.
    pub fn tails(&self, values: &[T], n: T) -> (Option<T>, Option<T>) {
        let m = values.len();
        let g = |i: usize| values[i] * (n * self.s(i)).exp();
        let lo = power_tail(g(0), g(1), self.h);
        let hi = power_tail(g(m - 1), g(m - 2), self.h);
        (lo, hi)
    }

    /// Cubic interpolation of node samples at radius `r`, power-law extrapolation outside.
    pub fn interpolate(&self, values: &[T], r: T) -> T {
        let m = values.len();
        let x = self.position(r);
        if x <= T::zero() {
            return extrapolate(values[0], values[1], x);
        }
        let last = lit::<T>((m - 1) as f64);
        if x >= last {
            return extrapolate(values[m - 1], values[m - 2], x - last);
        }
        let i = x.floor().to_usize().unwrap_or(0).clamp(1, m - 3);
        let t = x - lit::<T>(i as f64);
        let (f0, f1, f2, f3) = (values[i - 1], values[i], values[i + 1], values[i + 2]);
        let one = T::one();
        let two = lit::<T>(2.0);
        let six = lit::<T>(6.0);
        -f0 * t * (t - one) * (t - two) / six + f1 * (t + one) * (t - one) * (t - two) / two
            - f2 * (t + one) * t * (t - two) / two
            + f3 * (t + one) * t * (t - one) / six
    }

    /// Derivative in `s` of node samples.
    pub fn d_ds(&self, f: &[T], stencil: Stencil) -> Vec<T> {
        let m = f.len();
        let h = self.h;
        let mut out = vec![T::zero(); m];
        let two = lit::<T>(2.0);
        out[0] = (-lit::<T>(3.0) * f[0] + lit::<T>(4.0) * f[1] - f[2]) / (two * h);
        out[m - 1] = (lit::<T>(3.0) * f[m - 1] - lit::<T>(4.0) * f[m - 2] + f[m - 3]) / (two * h);
        for i in 1..m - 1 {
            let fourth = stencil == Stencil::Fourth && i >= 2 && i + 2 < m;
            out[i] = if fourth {
                (f[i - 2] - lit::<T>(8.0) * f[i - 1] + lit::<T>(8.0) * f[i + 1] - f[i + 2]) / (lit::<T>(12.0) * h)
            } else {
                (f[i + 1] - f[i - 1]) / (two * h)
            };
        }
        out
    }

    /// Second derivative in `s` of node samples.
    pub fn d2_ds2(&self, f: &[T], stencil: Stencil) -> Vec<T> {
        let m = f.len();
        let h2 = self.h * self.h;
        let mut out = vec![T::zero(); m];
        let c = |a: f64| lit::<T>(a);
        out[0] = (c(2.0) * f[0] - c(5.0) * f[1] + c(4.0) * f[2] - f[3]) / h2;
        out[m - 1] = (c(2.0) * f[m - 1] - c(5.0) * f[m - 2] + c(4.0) * f[m - 3] - f[m - 4]) / h2;
        for i in 1..m - 1 {
            let fourth = stencil == Stencil::Fourth && i >= 2 && i + 2 < m;
            out[i] = if fourth {
                (-f[i - 2] + c(16.0) * f[i - 1] - c(30.0) * f[i] + c(16.0) * f[i + 1] - f[i + 2]) / (c(12.0) * h2)
            } else {
                (f[i + 1] - c(2.0) * f[i] + f[i - 1]) / h2
            };
        }
        out
    }

    /// Radial derivative `∂_r f = e^{-s} ∂_s f`.
    pub fn d_dr(&self, f: &[T], stencil: Stencil) -> Vec<T> {
        self.d_ds(f, stencil).into_iter().zip(&self.nodes).map(|(d, &r)| d / r).collect()
    }

    /// Radial Laplacian in dimension `n`: `∂_rr f + (n-1)/r ∂_r f`.
    pub fn laplacian_values(&self, f: &[T], n: T, stencil: Stencil) -> Vec<T> {
        let fs = self.d_ds(f, stencil);
        let fss = self.d2_ds2(f, stencil);
        let two = lit::<T>(2.0);
        (0..f.len()).map(|i| (fss[i] + (n - two) * fs[i]) / (self.nodes[i] * self.nodes[i])).collect()
    }

    /// Running integral `∫_{s_0}^{s_i} g ds` with a fourth-order rule.
    pub fn cumulative(&self, g: &[T]) -> Vec<T> {
        cumulative_uniform(g, self.h)
    }
}

/// Running integral of uniformly spaced samples with a fourth-order cubic rule.
pub fn cumulative_uniform<T: Real>(g: &[T], h: T) -> Vec<T> {
    let m = g.len();
    let mut out = vec![T::zero(); m];
    if m < 4 {
        for i in 1..m {
            out[i] = out[i - 1] + (g[i - 1] + g[i]) * h * lit(0.5);
        }
        return out;
    }
    let c = |a: f64| lit::<T>(a);
    let k = h / c(24.0);
    for i in 0..m - 1 {
        let piece = if i == 0 {
            (c(9.0) * g[0] + c(19.0) * g[1] - c(5.0) * g[2] + g[3]) * k
        } else if i == m - 2 {
            (g[m - 4] - c(5.0) * g[m - 3] + c(19.0) * g[m - 2] + c(9.0) * g[m - 1]) * k
        } else {
            (-g[i - 1] + c(13.0) * g[i] + c(13.0) * g[i + 1] - g[i + 2]) * k
        };
        out[i + 1] = out[i] + piece;
    }
    out
}

/// Tail of `∫ G(s) ds` beyond an end node, modelling `G` as an exponential in `s`.
///
/// `edge` is the end sample and `inner` its neighbour one step inside.
fn power_tail<T: Real>(edge: T, inner: T, h: T) -> Option<T> {
    if edge == T::zero() {
        return Some(T::zero());
    }
    if inner == T::zero() || (edge > T::zero()) != (inner > T::zero()) {
        return Some(T::zero());
    }
    // Decay rate of |G| moving outward.
    let rate = (inner / edge).ln() / h;
    if rate > lit(0.25) {
        Some(edge / rate)
    } else if edge.abs() < T::min_positive_value().sqrt() {
        Some(T::zero())
    } else {
        None
    }
}

fn extrapolate<T: Real>(edge: T, inner: T, steps_out: T) -> T {
    if edge == T::zero() || inner == T::zero() || (edge > T::zero()) != (inner > T::zero()) {
        return edge;
    }
    edge * (edge / inner).powf(steps_out.abs())
}

/// Scaling class of a radial field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FieldKind {
    /// Radial function on `R^N`; rescales as `λ^{-D} φ(r/λ)`.
    U,
    /// Equivariant profile on `R^2`; rescales as `φ(r/λ)`.
    V,
}

impl FieldKind {
    pub fn label(self) -> &'static str {
        match self {
            FieldKind::U => "u-type",
            FieldKind::V => "v-type",
        }
    }
}

/// Node samples of a radial function on a shared grid.
#[derive(Debug, Clone)]
pub struct RadialField<T: Real> {
    grid: Arc<RadialGrid<T>>,
    values: Vec<T>,
    kind: FieldKind,
}

impl<T: Real> RadialField<T> {
    pub fn new(grid: Arc<RadialGrid<T>>, values: Vec<T>, kind: FieldKind) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("field value at node {i}")));
        }
        Ok(Self { grid, values, kind })
    }

    /// Samples `f(r)` at every node.
    pub fn from_fn(grid: Arc<RadialGrid<T>>, kind: FieldKind, f: impl Fn(T) -> T) -> Result<Self> {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self::new(grid, values, kind)
    }

    pub fn zeros(grid: Arc<RadialGrid<T>>, kind: FieldKind) -> Self {
        let values = vec![T::zero(); grid.len()];
        Self { grid, values, kind }
    }

    pub fn grid(&self) -> &Arc<RadialGrid<T>> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    fn compatible(&self, other: &Self) -> Result<()> {
        if !Arc::ptr_eq(&self.grid, &other.grid) && *self.grid != *other.grid {
            return Err(Error::GridMismatch);
        }
        if self.kind != other.kind {
            return Err(Error::KindMismatch { expected: self.kind.label(), found: other.kind.label() });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.compatible(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| a + b).collect();
        Self::new(self.grid.clone(), values, self.kind)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.compatible(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| a - b).collect();
        Self::new(self.grid.clone(), values, self.kind)
    }

    pub fn scaled(&self, c: T) -> Self {
        let values = self.values.iter().map(|&a| a * c).collect();
        Self { grid: self.grid.clone(), values, kind: self.kind }
    }

    /// `v = r^d u` for a u-type field.
    pub fn to_v(&self, d: T) -> Result<Self> {
        self.expect_kind(FieldKind::U)?;
        let values = self.grid.nodes().iter().zip(&self.values).map(|(&r, &u)| r.powf(d) * u).collect();
        Self::new(self.grid.clone(), values, FieldKind::V)
    }

    /// `u = r^{-d} v` for a v-type field.
    pub fn to_u(&self, d: T) -> Result<Self> {
        self.expect_kind(FieldKind::V)?;
        let values = self.grid.nodes().iter().zip(&self.values).map(|(&r, &v)| v / r.powf(d)).collect();
        Self::new(self.grid.clone(), values, FieldKind::U)
    }

    pub fn expect_kind(&self, kind: FieldKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::KindMismatch { expected: kind.label(), found: self.kind.label() });
        }
        Ok(())
    }

    /// Value at an arbitrary radius by cubic interpolation in `ln r`.
    pub fn at(&self, r: T) -> T {
        self.grid.interpolate(&self.values, r)
    }

    /// Resamples `λ^{-d} φ(r/λ)` (u-type) or `φ(r/λ)` (v-type) onto the same grid.
    pub fn rescale(&self, lambda: T, d: T) -> Result<Self> {
        if !(lambda > T::zero()) {
            return Err(Error::Parameter(format!("scale must be positive, got {lambda}")));
        }
        let span = (self.grid.r_max() / self.grid.r_min()).ln();
        if lambda.ln().abs() > span * lit(0.5) {
            return Err(Error::ScaleResolution(lambda.as_f64()));
        }
        let amp = match self.kind {
            FieldKind::U => lambda.powf(-d),
            FieldKind::V => T::one(),
        };
        let values = self.grid.nodes().iter().map(|&r| amp * self.at(r / lambda)).collect();
        Self::new(self.grid.clone(), values, self.kind)
    }
}

/// Area of the unit sphere in `R^n`, `2 π^{n/2} / Γ(n/2)`, for integer `n ≥ 1`.
pub fn sphere_area<T: Real>(n: u32) -> T {
    // Γ(n/2) by the half-integer recursion.
    let mut gamma = if n.is_multiple_of(2) { 1.0 } else { std::f64::consts::PI.sqrt() };
    let mut k = if n.is_multiple_of(2) { 1.0 } else { 0.5 };
    while k < n as f64 / 2.0 - 1e-9 {
        gamma *= k;
        k += 1.0;
    }
    lit(2.0 * std::f64::consts::PI.powf(n as f64 / 2.0) / gamma)
}

/// L², Ḣ¹ and Ḣ² norms of a u-type field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms<T> {
    pub l2: T,
    pub h1dot: T,
    pub h2dot: T,
}

/// `⟨f, g⟩ = c_N ∫ f g r^{N-1} dr` for u-type fields in dimension `n`.
pub fn inner<T: Real>(f: &RadialField<T>, g: &RadialField<T>, n: u32) -> Result<T> {
    f.compatible(g)?;
    f.expect_kind(FieldKind::U)?;
    let prod: Vec<T> = f.values.iter().zip(&g.values).map(|(&a, &b)| a * b).collect();
    Ok(sphere_area::<T>(n) * f.grid.integral(&prod, lit(n as f64)))
}

/// Norms of a u-type field in dimension `n` using the given stencil.
pub fn norms_with<T: Real>(f: &RadialField<T>, n: u32, stencil: Stencil) -> Result<Norms<T>> {
    f.expect_kind(FieldKind::U)?;
    let grid = &f.grid;
    let nn = lit::<T>(n as f64);
    let w = grid.weights(nn);
    let c = sphere_area::<T>(n);
    let sq = |v: &[T]| -> T {
        let p: Vec<T> = v.iter().map(|&a| a * a).collect();
        (c * grid.integral_with(&p, &w, nn)).max(T::zero()).sqrt()
    };
    let dr = grid.d_dr(&f.values, stencil);
    let lap = grid.laplacian_values(&f.values, nn, stencil);
    Ok(Norms { l2: sq(&f.values), h1dot: sq(&dr), h2dot: sq(&lap) })
}
