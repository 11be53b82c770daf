//! Extraction of the scales `λ⃗` and the remainder `g = u − U(ι⃗, λ⃗)` from a state through
//! the orthogonality conditions `⟨g, 𝒵_{λ̲_k}⟩ = 0`, and the modulation-estimate check.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::equation::EquationKind;
use crate::error::{Error, Result};
use crate::grid::{inner, norms_with, sphere_area, FieldKind, RadialField, RadialGrid, Stencil};
use crate::kernel::KernelPair;
use crate::profile::{build_profile, chi, BubbleConfig, ModifiedProfile, ProfileSettings};
use crate::quad;
use crate::real::{lit, Real};

/// `𝒵 = c (1 − χ_{R₀⁻¹}) χ_{R₀/2} ΛW`, normalised so that `⟨𝒵, ΛW⟩ = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZProfile<T> {
    pub kind: EquationKind,
    pub r0: T,
    pub c: T,
}

/// Default support parameter `R₀`.
pub const DEFAULT_R0: f64 = 16.0;

impl<T: Real> ZProfile<T> {
    pub fn new(kind: EquationKind, r0: T) -> Result<Self> {
        if !(r0 > lit(10.0)) || !r0.is_finite() {
            return Err(Error::Parameter(format!("R0 must exceed 10, got {r0}")));
        }
        let unit = Self { kind, r0, c: T::one() };
        let pairing = unit.pairing_with_lambda_w()?;
        if !(pairing.abs() > lit(1e-12)) {
            return Err(Error::Degenerate(format!("⟨Z, ΛW⟩ = {pairing} before normalisation")));
        }
        Ok(Self { kind, r0, c: T::one() / pairing })
    }

    /// `𝒵(y)`.
    pub fn value(&self, y: T) -> T {
        if !(y > T::zero()) {
            return T::zero();
        }
        let two = lit::<T>(2.0);
        self.c * (T::one() - chi(y * self.r0)) * chi(two * y / self.r0) * self.kind.lambda_w(y)
    }

    /// `⟨𝒵, ΛW⟩` by adaptive quadrature in `ln y` over the support.
    pub fn pairing_with_lambda_w(&self) -> Result<T> {
        let n = self.kind.n_real::<T>();
        let integrand = |s: T| {
            let y = s.exp();
            self.value(y) * self.kind.lambda_w(y) * y.powf(n)
        };
        let r0 = self.r0;
        let knots = [T::one() / r0, lit::<T>(1.9) / r0, r0 / lit(2.0), lit::<T>(0.95) * r0, r0].map(|x| x.ln());
        let mut total = T::zero();
        for w in knots.windows(2) {
            if w[1] > w[0] {
                total += quad::integrate(integrand, w[0], w[1], lit(1e-16), lit(1e-13))?;
            }
        }
        Ok(sphere_area::<T>(self.kind.n()) * total)
    }

    /// `𝒵_{λ̲}(r) = λ^{-D-2} 𝒵(r/λ)` on a grid.
    pub fn scaled(&self, grid: &Arc<RadialGrid<T>>, lambda: T) -> Result<RadialField<T>> {
        let d = self.kind.d::<T>();
        let amp = lambda.powf(-d - lit(2.0));
        RadialField::from_fn(grid.clone(), FieldKind::U, |r| amp * self.value(r / lambda))
    }
}

/// Everything a fit needs besides the state.
#[derive(Debug, Clone)]
pub struct FitContext<'a, T: Real> {
    pub kind: EquationKind,
    pub kernel: &'a KernelPair<T>,
    pub kappa: T,
    pub settings: ProfileSettings<T>,
    pub z: ZProfile<T>,
    pub max_iter: usize,
    /// Relative step in `ln λ` for the measured Jacobian.
    pub jacobian_step: T,
}

impl<'a, T: Real> FitContext<'a, T> {
    pub fn new(kind: EquationKind, kernel: &'a KernelPair<T>, kappa: T) -> Result<Self> {
        if kernel.kind() != kind {
            return Err(Error::Parameter(format!("kernel built for {} used with {kind}", kernel.kind())));
        }
        Ok(Self {
            kind,
            kernel,
            kappa,
            settings: ProfileSettings::default(),
            z: ZProfile::new(kind, lit(DEFAULT_R0))?,
            max_iter: 40,
            jacobian_step: lit(1e-5),
        })
    }

    pub fn profile(&self, grid: &Arc<RadialGrid<T>>, config: &BubbleConfig<T>) -> Result<ModifiedProfile<T>> {
        build_profile(self.kind, grid, self.kernel, self.kappa, config, &self.settings)
    }
}

/// Norms of the remainder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemainderNorms<T> {
    pub h1dot: T,
    pub h2dot: T,
    /// `max_k ‖r^{-1} g‖_{L²}` over the annulus `[λ_k/R₀, R₀λ_k]`.
    pub weighted_local: T,
}

#[derive(Debug, Clone)]
pub struct FitResult<T: Real> {
    pub iotas: Vec<i8>,
    pub lambdas: Vec<T>,
    /// `g = u − U(ι⃗, λ⃗)`, u-type.
    pub g: RadialField<T>,
    /// `|⟨g, 𝒵_{λ̲_k}⟩|` per `k`.
    pub orthogonality_residuals: Vec<T>,
    pub newton_iters: usize,
    pub d_quantity: T,
    pub g_norms: RemainderNorms<T>,
    /// `[k][j] = λ_j ∂_{λ_j} F_k` at the solution.
    pub jacobian: Vec<Vec<T>>,
}

impl<T: Real> FitResult<T> {
    pub fn config(&self) -> Result<BubbleConfig<T>> {
        BubbleConfig::new(self.iotas.clone(), self.lambdas.clone())
    }

    /// Largest orthogonality residual relative to `‖g‖_{Ḣ¹}`.
    pub fn relative_orthogonality(&self) -> T {
        let worst = self.orthogonality_residuals.iter().fold(T::zero(), |a, &b| a.max(b));
        if worst == T::zero() {
            T::zero()
        } else {
            worst / self.g_norms.h1dot.max(T::min_positive_value())
        }
    }
}

/// `F_k = ⟨u − U, ι_k 𝒵_{λ̲_k}⟩` and the remainder for one scale vector.
fn residuals<T: Real>(
    ctx: &FitContext<T>,
    u: &RadialField<T>,
    iotas: &[i8],
    lambdas: &[T],
) -> Result<(Vec<T>, RadialField<T>)> {
    let config = BubbleConfig::new(iotas.to_vec(), lambdas.to_vec())?;
    if config.max_mu() > lit(0.5) {
        return Err(Error::Collision(config.max_mu().as_f64()));
    }
    let profile = ctx.profile(u.grid(), &config)?;
    let g = u.sub(&profile.u)?;
    let f = lambdas
        .iter()
        .zip(iotas)
        .map(|(&lam, &iota)| Ok(lit::<T>(f64::from(iota)) * inner(&g, &ctx.z.scaled(u.grid(), lam)?, ctx.kind.n())?))
        .collect::<Result<Vec<T>>>()?;
    Ok((f, g))
}

/// `[k][j] = ∂F_k/∂ln λ_j` by central differences.
fn jacobian<T: Real>(ctx: &FitContext<T>, u: &RadialField<T>, iotas: &[i8], lambdas: &[T]) -> Result<Vec<Vec<T>>> {
    let jn = lambdas.len();
    let step = ctx.jacobian_step;
    let mut jac = vec![vec![T::zero(); jn]; jn];
    for j in 0..jn {
        let mut plus = lambdas.to_vec();
        let mut minus = lambdas.to_vec();
        plus[j] *= step.exp();
        minus[j] *= (-step).exp();
        let (fp, _) = residuals(ctx, u, iotas, &plus)?;
        let (fm, _) = residuals(ctx, u, iotas, &minus)?;
        for k in 0..jn {
            jac[k][j] = (fp[k] - fm[k]) / (step + step);
        }
    }
    Ok(jac)
}

fn remainder_norms<T: Real>(kind: EquationKind, g: &RadialField<T>, lambdas: &[T], r0: T) -> Result<RemainderNorms<T>> {
    let norms = norms_with(g, kind.n(), Stencil::Fourth)?;
    let grid = g.grid();
    let n = kind.n_real::<T>();
    let mut local = T::zero();
    for &lam in lambdas {
        let vals: Vec<T> = grid
            .nodes()
            .iter()
            .zip(g.values())
            .map(|(&r, &v)| if r >= lam / r0 && r <= lam * r0 { (v / r).powi(2) } else { T::zero() })
            .collect();
        local = local.max((sphere_area::<T>(kind.n()) * grid.integral(&vals, n)).sqrt());
    }
    Ok(RemainderNorms { h1dot: norms.h1dot, h2dot: norms.h2dot, weighted_local: local })
}

/// Newton iteration on `F(λ⃗) = 0` in `ln λ⃗` with the measured Jacobian, damped by ½ on the
/// first two iterates. Converges when every `|F_k| ≤ 1e-10 ‖g‖_{Ḣ¹}` or the update is below `1e-13`.
pub fn fit_scales<T: Real>(ctx: &FitContext<T>, u: &RadialField<T>, iotas: &[i8], guess: &[T]) -> Result<FitResult<T>> {
    u.expect_kind(FieldKind::U)?;
    BubbleConfig::new(iotas.to_vec(), guess.to_vec())?;
    let kind = ctx.kind;
    let mut lambdas = guess.to_vec();
    let mut last_norm = T::infinity();
    for iter in 0..ctx.max_iter {
        let (f, g) = residuals(ctx, u, iotas, &lambdas)?;
        let g_h1 = norms_with(&g, kind.n(), Stencil::Fourth)?.h1dot;
        let worst = f.iter().fold(T::zero(), |a, &b| a.max(b.abs()));
        let jac = jacobian(ctx, u, iotas, &lambdas)?;
        if worst <= lit::<T>(1e-10) * g_h1 || worst == T::zero() || (iter > 0 && last_norm < lit(1e-13)) {
            return finish(ctx, iotas, lambdas, f, g, iter, jac);
        }
        let jn = lambdas.len();
        let a = DMatrix::from_fn(jn, jn, |k, j| jac[k][j].as_f64());
        let b = DVector::from_iterator(jn, f.iter().map(|x| -x.as_f64()));
        let delta = a.lu().solve(&b).ok_or_else(|| Error::Degenerate("singular fit Jacobian".into()))?;
        let damping = if iter < 2 { 0.5 } else { 1.0 };
        last_norm = lit(delta.amax() * damping);
        if !last_norm.is_finite() || last_norm > lit(2.0) {
            return Err(Error::NewtonDivergence { iters: iter + 1, residual: worst.as_f64() });
        }
        for j in 0..jn {
            lambdas[j] *= lit::<T>(damping * delta[j]).exp();
        }
    }
    let (f, _) = residuals(ctx, u, iotas, &lambdas)?;
    let worst = f.iter().fold(0.0f64, |a, b| a.max(b.abs().as_f64()));
    Err(Error::NewtonDivergence { iters: ctx.max_iter, residual: worst })
}

fn finish<T: Real>(
    ctx: &FitContext<T>,
    iotas: &[i8],
    lambdas: Vec<T>,
    f: Vec<T>,
    g: RadialField<T>,
    iters: usize,
    jac: Vec<Vec<T>>,
) -> Result<FitResult<T>> {
    let config = BubbleConfig::new(iotas.to_vec(), lambdas.clone())?;
    let g_norms = remainder_norms(ctx.kind, &g, &lambdas, ctx.z.r0)?;
    Ok(FitResult {
        iotas: iotas.to_vec(),
        d_quantity: config.d_quantity(ctx.kind),
        lambdas,
        g,
        orthogonality_residuals: f.iter().map(|x| x.abs()).collect(),
        newton_iters: iters,
        g_norms,
        jacobian: jac,
    })
}

/// One row of the modulation check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationRow<T> {
    pub t: T,
    /// 1-based bubble index.
    pub k: usize,
    /// `λ_{k,t}/λ_k` by three-point differences of `ln λ_k`.
    pub measured: T,
    /// `ῑ_k κ μ_k^D / λ_k²`.
    pub predicted: T,
    /// `μ_{k+1}^D/λ_k² + o(1) μ_k^D/λ_k² + 𝒟 + ‖g‖²_{Ḣ²}`.
    pub budget: T,
}

impl<T: Real> ModulationRow<T> {
    pub fn discrepancy(&self) -> T {
        (self.measured - self.predicted).abs()
    }

    pub fn within_budget(&self) -> bool {
        self.discrepancy() <= self.budget
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModulationReport<T> {
    pub small_o: T,
    pub rows: Vec<ModulationRow<T>>,
}

impl<T: Real> ModulationReport<T> {
    /// Fraction of interior snapshots within budget for bubble `k`.
    pub fn fraction_within(&self, k: usize) -> T {
        let rows: Vec<_> = self.rows.iter().filter(|r| r.k == k).collect();
        if rows.is_empty() {
            return T::zero();
        }
        lit::<T>(rows.iter().filter(|r| r.within_budget()).count() as f64) / lit(rows.len() as f64)
    }
}

/// Compares finite-difference rates from a fit sequence with the modulation ODE.
///
/// `small_o` is the value assigned to the `o(1)` factor of the budget.
pub fn modulation_check<T: Real>(
    kind: EquationKind,
    kappa: T,
    times: &[T],
    fits: &[FitResult<T>],
    small_o: T,
) -> Result<ModulationReport<T>> {
    if times.len() != fits.len() || times.len() < 3 {
        return Err(Error::Parameter("modulation check needs at least three fits with times".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Parameter("fit times must be strictly increasing".into()));
    }
    let d = kind.d::<T>();
    let jn = fits[0].lambdas.len();
    let mut rows = Vec::new();
    for i in 1..times.len() - 1 {
        let (t0, t1, t2) = (times[i - 1], times[i], times[i + 1]);
        let (h0, h1) = (t1 - t0, t2 - t1);
        let fit = &fits[i];
        let cfg = fit.config()?;
        let g2 = fit.g_norms.h2dot.powi(2);
        for k in 1..=jn {
            let l = |f: &FitResult<T>| f.lambdas[k - 1].ln();
            let measured = -h1 / (h0 * (h0 + h1)) * l(&fits[i - 1])
                + (h1 - h0) / (h0 * h1) * l(fit)
                + h0 / (h1 * (h0 + h1)) * l(&fits[i + 1]);
            let lam2 = cfg.lambda(k).powi(2);
            let mu_d = cfg.mu(k).powf(d);
            let predicted = if k == 1 { T::zero() } else { cfg.iota_bar(k) * kappa * mu_d / lam2 };
            let budget = cfg.mu(k + 1).powf(d) / lam2 + small_o * mu_d / lam2 + fit.d_quantity + g2;
            rows.push(ModulationRow { t: t1, k, measured, predicted, budget });
        }
    }
    Ok(ModulationReport { small_o, rows })
}
