//! Modified multi-bubble profiles `U = Σ W_{;j} + Σ χ φ_ℓ`, built level by level by a
//! contraction in weighted sup norms, together with the residual `Ψ`.
//!
//! Level `ℓ` solves `φ = 1_{(0, 2δ₀λ_{ℓ-1})} H_{λ_ℓ}⁻¹ {χ R⁽⁰⁾ + R⁽¹⁾[φ] - 𝔯[φ] ΛW_{ul;ℓ}}`
//! with the orthogonal right inverse; `𝔯` is the coefficient that makes the bracket
//! orthogonal to `ΛW_{;ℓ}` in the grid pairing.

use std::sync::Arc;

use crate::equation::EquationKind;
use crate::error::{Error, Result};
use crate::grid::{sphere_area, FieldKind, RadialField, RadialGrid, Stencil};
use crate::kernel::{InverseMode, KernelPair};
use crate::real::{lit, Real};

/// Signs and scales of a bubble tree, `λ_1 > λ_2 > … > λ_J > 0`.
///
/// Indices in the accessors are 1-based, matching `j = 1..=J`.
#[derive(Debug, Clone, PartialEq)]
pub struct BubbleConfig<T> {
    iotas: Vec<i8>,
    lambdas: Vec<T>,
}

impl<T: Real> BubbleConfig<T> {
    pub fn new(iotas: Vec<i8>, lambdas: Vec<T>) -> Result<Self> {
        if iotas.is_empty() || iotas.len() != lambdas.len() {
            return Err(Error::Parameter("signs and scales must be nonempty and of equal length".into()));
        }
        if iotas.iter().any(|&i| i != 1 && i != -1) {
            return Err(Error::Parameter("signs must be ±1".into()));
        }
        if lambdas.iter().any(|&l| !(l > T::zero()) || !l.is_finite()) {
            return Err(Error::Parameter("scales must be positive and finite".into()));
        }
        if lambdas.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Parameter("scales must be strictly decreasing".into()));
        }
        Ok(Self { iotas, lambdas })
    }

    /// Rejects configurations with some `μ_j ≥ α₀`.
    pub fn check_decoupled(&self, alpha0: T) -> Result<()> {
        let worst = self.max_mu();
        if worst >= alpha0 {
            return Err(Error::Parameter(format!("scale ratio {worst} is not below α₀ = {alpha0}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn iotas(&self) -> &[i8] {
        &self.iotas
    }

    pub fn lambdas(&self) -> &[T] {
        &self.lambdas
    }

    pub fn lambda(&self, j: usize) -> T {
        self.lambdas[j - 1]
    }

    pub fn iota(&self, j: usize) -> T {
        lit(self.iotas[j - 1] as f64)
    }

    /// `μ_j = λ_j / λ_{j-1}`, zero for `j = 1` and `j > J`.
    pub fn mu(&self, j: usize) -> T {
        if j <= 1 || j > self.len() {
            T::zero()
        } else {
            self.lambda(j) / self.lambda(j - 1)
        }
    }

    pub fn max_mu(&self) -> T {
        (2..=self.len()).map(|j| self.mu(j)).fold(T::zero(), T::max)
    }

    /// `λ̄_j = √(λ_j λ_{j-1})`.
    pub fn lambda_bar(&self, j: usize) -> T {
        (self.lambda(j) * self.lambda(j - 1)).sqrt()
    }

    /// `ῑ_j = ι_j ι_{j-1}`.
    pub fn iota_bar(&self, j: usize) -> T {
        self.iota(j) * self.iota(j - 1)
    }

    /// `𝒟 = Σ_{j≥2} μ_j^{2D} / λ_j²`.
    pub fn d_quantity(&self, kind: EquationKind) -> T {
        let d = kind.d::<T>();
        (2..=self.len()).map(|j| self.mu(j).powf(d + d) / (self.lambda(j) * self.lambda(j))).sum()
    }

    /// The configuration with every scale multiplied by `c`.
    pub fn scaled(&self, c: T) -> Result<Self> {
        Self::new(self.iotas.clone(), self.lambdas.iter().map(|&l| l * c).collect())
    }

    /// The configuration with `λ_j` multiplied by `c`.
    pub fn with_lambda(&self, j: usize, c: T) -> Result<Self> {
        let mut lambdas = self.lambdas.clone();
        lambdas[j - 1] *= c;
        Self::new(self.iotas.clone(), lambdas)
    }
}

/// Knobs of the fixed-point construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileSettings<T> {
    /// Cutoff radius of level `ℓ` is `δ₀ λ_{ℓ-1}`.
    pub delta0: T,
    /// Stop when the weighted sup-norm change falls below this.
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Real> Default for ProfileSettings<T> {
    fn default() -> Self {
        Self { delta0: lit(0.3), tol: lit(1e-10), max_iter: 60 }
    }
}

/// `χ(x)`: 1 for `x ≤ 1`, 0 for `x ≥ 1.9`, a `C^∞` blend in between.
pub fn chi<T: Real>(x: T) -> T {
    let t = (x - T::one()) / lit(0.9);
    if t <= T::zero() {
        return T::one();
    }
    if t >= T::one() {
        return T::zero();
    }
    let psi = |z: T| if z > T::zero() { (-T::one() / z).exp() } else { T::zero() };
    let (a, b) = (psi(T::one() - t), psi(t));
    a / (a + b)
}

/// `χ_R(r) = χ(r / R)` sampled on a grid.
pub fn cutoff_chi<T: Real>(grid: &Arc<RadialGrid<T>>, radius: T) -> Result<RadialField<T>> {
    if !(radius > T::zero()) {
        return Err(Error::Parameter("cutoff radius must be positive".into()));
    }
    RadialField::from_fn(grid.clone(), FieldKind::U, |r| chi(r / radius))
}

/// The three-piece weight `ω_ℓ(r)` on `(0, 2δ₀λ_{ℓ-1}]`, zero beyond.
pub fn omega<T: Real>(kind: EquationKind, config: &BubbleConfig<T>, level: usize, delta0: T, r: T) -> T {
    let d = kind.d::<T>();
    let lam = config.lambda(level);
    let prev = config.lambda(level - 1);
    let bar = config.lambda_bar(level);
    let two = lit::<T>(2.0);
    if r <= lam {
        (r / lam).powi(2)
    } else if r <= bar {
        (lam / r).powi(2)
    } else if r <= two * delta0 * prev {
        prev.powf(d - two) * lam.powf(d) / r.powf(two * d - two)
    } else {
        T::zero()
    }
}

/// `ω_ℓ` sampled on a grid.
pub fn weight_omega<T: Real>(
    kind: EquationKind,
    grid: &Arc<RadialGrid<T>>,
    config: &BubbleConfig<T>,
    level: usize,
    delta0: T,
) -> Result<RadialField<T>> {
    if level < 2 || level > config.len() {
        return Err(Error::Parameter(format!("level {level} outside 2..={}", config.len())));
    }
    RadialField::from_fn(grid.clone(), FieldKind::U, |r| omega(kind, config, level, delta0, r))
}

/// One level of the construction.
#[derive(Debug, Clone)]
pub struct CorrectorProfile<T: Real> {
    pub level: usize,
    /// `φ_ℓ`, zero for `r ≥ 2δ₀λ_{ℓ-1}`.
    pub phi: RadialField<T>,
    /// `𝔯_ℓ` at the fixed point.
    pub frkr: T,
    pub iterations: usize,
    /// Weighted sup-norm change of every iterate.
    pub deltas: Vec<T>,
    /// `λ_{ℓ-1}^D sup |φ_ℓ| / ω_ℓ`.
    pub weighted_bound: T,
}

/// `U_ℓ` in the v-picture at the nodes, from the bubbles and correctors up to `level`.
fn partial_profile_v<T: Real>(
    kind: EquationKind,
    grid: &RadialGrid<T>,
    config: &BubbleConfig<T>,
    prior: &[CorrectorProfile<T>],
    level: usize,
    delta0: T,
) -> Vec<T> {
    let d = kind.d::<T>();
    let mut v: Vec<T> = grid
        .nodes()
        .iter()
        .map(|&r| (1..=level).map(|j| config.iota(j) * kind.ground_v(r / config.lambda(j))).sum())
        .collect();
    for c in prior.iter().filter(|c| c.level <= level) {
        let radius = delta0 * config.lambda(c.level - 1);
        for (i, &r) in grid.nodes().iter().enumerate() {
            v[i] += chi(r / radius) * r.powf(d) * c.phi.values()[i];
        }
    }
    v
}

/// Solves the fixed-point problem for `φ_level` given the lower levels.
pub fn build_corrector<T: Real>(
    kind: EquationKind,
    grid: &Arc<RadialGrid<T>>,
    kernel: &KernelPair<T>,
    config: &BubbleConfig<T>,
    prior: &[CorrectorProfile<T>],
    level: usize,
    settings: &ProfileSettings<T>,
) -> Result<CorrectorProfile<T>> {
    if level < 2 || level > config.len() {
        return Err(Error::Parameter(format!("level {level} outside 2..={}", config.len())));
    }
    if (2..level).any(|l| !prior.iter().any(|c| c.level == l)) {
        return Err(Error::Parameter(format!("correctors 2..{level} must precede level {level}")));
    }
    let d = kind.d::<T>();
    let n = kind.n_real::<T>();
    let m = grid.len();
    let lam = config.lambda(level);
    let prev = config.lambda(level - 1);
    let iota = config.iota(level);
    let radius = settings.delta0 * prev;
    let support = radius * lit(2.0);
    let nodes = grid.nodes();

    let lower_v = partial_profile_v(kind, grid, config, prior, level - 1, settings.delta0);
    let lower_u: Vec<T> = nodes.iter().zip(&lower_v).map(|(&r, &v)| v / r.powf(d)).collect();
    let amp = iota * lam.powf(-d);
    let bubble: Vec<T> = nodes.iter().map(|&r| amp * kind.ground_u(r / lam)).collect();
    let lw: Vec<T> = nodes.iter().map(|&r| amp * kind.lambda_w(r / lam)).collect();
    let lw_ul: Vec<T> = lw.iter().map(|&x| x / (lam * lam)).collect();
    let cut: Vec<T> = nodes.iter().map(|&r| chi(r / radius)).collect();
    let inside: Vec<bool> = nodes.iter().map(|&r| r < support).collect();
    let r0: Vec<T> = (0..m).map(|i| kind.interaction_u(nodes[i], bubble[i], lower_u[i])).collect();
    let weights = grid.weights(n);
    let pair = |f: &[T]| -> T {
        let prod: Vec<T> = f.iter().zip(&lw).map(|(&a, &b)| a * b).collect();
        grid.integral_with(&prod, &weights, n)
    };
    let norm_ul = pair(&lw_ul);
    let omega_w: Vec<T> = nodes.iter().map(|&r| omega(kind, config, level, settings.delta0, r)).collect();
    let scale = prev.powf(d);
    let weighted_sup = |f: &[T]| -> T {
        (0..m)
            .filter(|&i| inside[i] && omega_w[i] > T::zero())
            .map(|i| scale * f[i].abs() / omega_w[i])
            .fold(T::zero(), T::max)
    };
    let scaled = kernel.scaled(grid, lam)?;

    let mut phi = vec![T::zero(); m];
    let mut deltas = Vec::new();
    let mut frkr = T::zero();
    for iter in 1..=settings.max_iter {
        let g: Vec<T> = (0..m)
            .map(|i| cut[i] * r0[i] + kind.remainder_u(nodes[i], bubble[i], lower_u[i], cut[i] * phi[i]))
            .collect();
        frkr = pair(&g) / norm_ul;
        let f: Vec<T> = (0..m).map(|i| g[i] - frkr * lw_ul[i]).collect();
        let mut next = scaled.invert(grid, &f, InverseMode::Orthogonal)?;
        for i in 0..m {
            if !inside[i] {
                next[i] = T::zero();
            }
        }
        let diff: Vec<T> = (0..m).map(|i| next[i] - phi[i]).collect();
        let delta = weighted_sup(&diff);
        phi = next;
        deltas.push(delta);
        if !delta.is_finite() {
            return Err(Error::NonFinite(format!("corrector iterate at level {level}")));
        }
        if delta < settings.tol {
            let weighted_bound = weighted_sup(&phi);
            return Ok(CorrectorProfile {
                level,
                phi: RadialField::new(grid.clone(), phi, FieldKind::U)?,
                frkr,
                iterations: iter,
                deltas,
                weighted_bound,
            });
        }
        let k = deltas.len();
        if k >= 3 && deltas[k - 1] > deltas[k - 2] && deltas[k - 2] > deltas[k - 3] {
            break;
        }
    }
    let _ = frkr;
    Err(Error::NonContraction { level, deltas: deltas.iter().map(|x| x.as_f64()).collect() })
}

/// The assembled profile and its residual.
#[derive(Debug, Clone)]
pub struct ModifiedProfile<T: Real> {
    pub kind: EquationKind,
    pub config: BubbleConfig<T>,
    pub delta0: T,
    /// `U`, u-type.
    pub u: RadialField<T>,
    /// `P = r^D U`, v-type.
    pub p: RadialField<T>,
    /// `Ũ = Σ χ φ_ℓ`.
    pub u_tilde: RadialField<T>,
    /// `ΔU`: bubbles exactly, correctors by the fourth-order stencil.
    pub laplacian: RadialField<T>,
    /// `r^{-(D+2)} f(P)`.
    pub nonlinear: RadialField<T>,
    /// `-Σ_{j≥2} ῑ_j κ μ_j^D / λ_j² ΛW_{;j}`.
    pub main_term: RadialField<T>,
    /// `ΔU + r^{-(D+2)} f(P) - main_term`, assembled from cancellation-free pieces.
    pub psi: RadialField<T>,
    pub correctors: Vec<CorrectorProfile<T>>,
}

/// Builds every level and assembles `U` and `Ψ`.
pub fn build_profile<T: Real>(
    kind: EquationKind,
    grid: &Arc<RadialGrid<T>>,
    kernel: &KernelPair<T>,
    kappa: T,
    config: &BubbleConfig<T>,
    settings: &ProfileSettings<T>,
) -> Result<ModifiedProfile<T>> {
    let mut correctors: Vec<CorrectorProfile<T>> = Vec::new();
    for level in 2..=config.len() {
        let c = build_corrector(kind, grid, kernel, config, &correctors, level, settings)?;
        correctors.push(c);
    }
    assemble_profile(kind, grid, kappa, config, correctors, settings.delta0)
}

/// Assembles `U, P, Ũ, ΔU, f(P), Ψ` from finished correctors.
pub fn assemble_profile<T: Real>(
    kind: EquationKind,
    grid: &Arc<RadialGrid<T>>,
    kappa: T,
    config: &BubbleConfig<T>,
    correctors: Vec<CorrectorProfile<T>>,
    delta0: T,
) -> Result<ModifiedProfile<T>> {
    if correctors.len() + 1 != config.len() {
        return Err(Error::Parameter("one corrector per level 2..=J is required".into()));
    }
    let d = kind.d::<T>();
    let n = kind.n_real::<T>();
    let nodes = grid.nodes();
    let m = grid.len();
    let bubble_u = |j: usize, r: T| config.iota(j) * config.lambda(j).powf(-d) * kind.ground_u(r / config.lambda(j));

    let mut tilde = vec![T::zero(); m];
    let mut coupling = vec![T::zero(); m];
    let mut running = (0..m).map(|i| bubble_u(1, nodes[i])).collect::<Vec<_>>();
    for c in &correctors {
        let l = c.level;
        let radius = delta0 * config.lambda(l - 1);
        for i in 0..m {
            let r = nodes[i];
            let a = bubble_u(l, r);
            let piece = chi(r / radius) * c.phi.values()[i];
            let b = running[i];
            let pot = kind.potential(r / config.lambda(l)) / config.lambda(l).powi(2);
            coupling[i] += kind.interaction_u(r, a, b) + kind.remainder_u(r, a, b, piece) + pot * piece;
            tilde[i] += piece;
            running[i] = a + b + piece;
        }
    }
    let lap_tilde = grid.laplacian_values(&tilde, n, Stencil::Fourth);
    let bubbles_lap: Vec<T> = (0..m)
        .map(|i| -(1..=config.len()).map(|j| kind.nonlinear_u(nodes[i], bubble_u(j, nodes[i]))).sum::<T>())
        .collect();
    let main: Vec<T> = (0..m)
        .map(|i| {
            -(2..=config.len())
                .map(|j| {
                    let lam = config.lambda(j);
                    config.iota_bar(j) * kappa * config.mu(j).powf(d) / (lam * lam)
                        * config.iota(j)
                        * lam.powf(-d)
                        * kind.lambda_w(nodes[i] / lam)
                })
                .sum::<T>()
        })
        .collect();
    let psi: Vec<T> = (0..m).map(|i| lap_tilde[i] + coupling[i] - main[i]).collect();
    let laplacian: Vec<T> = (0..m).map(|i| bubbles_lap[i] + lap_tilde[i]).collect();
    let nonlinear: Vec<T> = (0..m).map(|i| kind.nonlinear_u(nodes[i], running[i])).collect();
    let p: Vec<T> = (0..m).map(|i| nodes[i].powf(d) * running[i]).collect();

    let field = |v: Vec<T>, k: FieldKind| RadialField::new(grid.clone(), v, k);
    Ok(ModifiedProfile {
        kind,
        config: config.clone(),
        delta0,
        u: field(running, FieldKind::U)?,
        p: field(p, FieldKind::V)?,
        u_tilde: field(tilde, FieldKind::U)?,
        laplacian: field(laplacian, FieldKind::U)?,
        nonlinear: field(nonlinear, FieldKind::U)?,
        main_term: field(main, FieldKind::U)?,
        psi: field(psi, FieldKind::U)?,
        correctors,
    })
}

/// `[⟨y⟩^{-2D}]_{ul;k} = λ_k^{-D-2} ⟨r/λ_k⟩^{-2D}`.
pub fn bracket_weight<T: Real>(kind: EquationKind, lambda: T, r: T) -> T {
    let d = kind.d::<T>();
    let y = r / lambda;
    lambda.powf(-d - lit(2.0)) * (T::one() + y * y).powf(-d)
}

/// `‖f · w‖_{L¹} = c_N ∫ |f| w r^{N-1} dr`.
pub fn weighted_l1<T: Real>(kind: EquationKind, f: &RadialField<T>, weight: impl Fn(T) -> T) -> T {
    let grid = f.grid();
    let vals: Vec<T> = grid.nodes().iter().zip(f.values()).map(|(&r, &v)| v.abs() * weight(r)).collect();
    sphere_area::<T>(kind.n()) * grid.integral(&vals, kind.n_real())
}

/// Measured norms of one profile against their reference sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileReport<T> {
    pub d_quantity: T,
    pub psi_l2: T,
    /// `‖Ψ‖_{L²} / √𝒟`; zero when `J = 1`.
    pub psi_ratio: T,
    /// `‖main_term‖_{L²} / √𝒟`; zero when `J = 1`.
    pub main_ratio: T,
    pub u_tilde_h1: T,
    /// Per `k = 1..=J`: `‖Ψ [⟨y⟩^{-2D}]_{ul;k}‖_{L¹}` and the reference
    /// `(μ_{k+1}^D + δ μ_k^D)/λ_k² + 𝒟` with `δ = max μ`.
    pub psi_weighted: Vec<(T, T)>,
    /// `|𝔯_ℓ + κ ῑ_ℓ μ_ℓ^D| / μ_ℓ^{D+1}` per level `ℓ = 2..=J`.
    pub frkr_defects: Vec<T>,
}

/// Norms of `Ψ`, `Ũ` and the main term.
pub fn profile_diagnostics<T: Real>(profile: &ModifiedProfile<T>, kappa: T) -> Result<ProfileReport<T>> {
    let kind = profile.kind;
    let cfg = &profile.config;
    let d = kind.d::<T>();
    let dq = cfg.d_quantity(kind);
    let norms = |f: &RadialField<T>| crate::grid::norms_with(f, kind.n(), Stencil::Fourth);
    let psi_l2 = norms(&profile.psi)?.l2;
    let main_l2 = norms(&profile.main_term)?.l2;
    let guard = |x: T| if dq > T::zero() { x / dq.sqrt() } else { T::zero() };
    let delta = cfg.max_mu();
    let psi_weighted = (1..=cfg.len())
        .map(|k| {
            let lam = cfg.lambda(k);
            let measured = weighted_l1(kind, &profile.psi, |r| bracket_weight(kind, lam, r));
            let bound = (cfg.mu(k + 1).powf(d) + delta * cfg.mu(k).powf(d)) / (lam * lam) + dq;
            (measured, bound)
        })
        .collect();
    let frkr_defects = profile
        .correctors
        .iter()
        .map(|c| {
            let mu = cfg.mu(c.level);
            (c.frkr + kappa * cfg.iota_bar(c.level) * mu.powf(d)).abs() / mu.powf(d + T::one())
        })
        .collect();
    Ok(ProfileReport {
        d_quantity: dq,
        psi_l2,
        psi_ratio: guard(psi_l2),
        main_ratio: guard(main_l2),
        u_tilde_h1: norms(&profile.u_tilde)?.h1dot,
        psi_weighted,
        frkr_defects,
    })
}

/// `‖λ_j ∂_{λ_j} Ũ · [⟨y⟩^{-2D}]_{ul;k}‖_{L¹}` by central differences in `ln λ_j`, with the
/// reference `1_{j=k}(μ_{k+1}^D + μ_k^D|log μ_k|) + 1_{j>k}(λ_j/λ_k)^D + 1_{j<k} δ (λ_k/λ_j)^{D-2}`.
///
/// Returns `[j][k] = (measured, reference)`.
pub fn lambda_derivative_norms<T: Real>(
    kind: EquationKind,
    grid: &Arc<RadialGrid<T>>,
    kernel: &KernelPair<T>,
    kappa: T,
    config: &BubbleConfig<T>,
    settings: &ProfileSettings<T>,
    step: T,
) -> Result<Vec<Vec<(T, T)>>> {
    let d = kind.d::<T>();
    let jn = config.len();
    let delta = config.max_mu();
    let mut out = Vec::with_capacity(jn);
    for j in 1..=jn {
        let plus = build_profile(kind, grid, kernel, kappa, &config.with_lambda(j, step.exp())?, settings)?;
        let minus = build_profile(kind, grid, kernel, kappa, &config.with_lambda(j, (-step).exp())?, settings)?;
        let deriv = plus.u_tilde.sub(&minus.u_tilde)?.scaled(T::one() / (step + step));
        let row = (1..=jn)
            .map(|k| {
                let lk = config.lambda(k);
                let measured = weighted_l1(kind, &deriv, |r| bracket_weight(kind, lk, r));
                let reference = if j == k {
                    let mk = config.mu(k);
                    let log_term = if mk > T::zero() { mk.powf(d) * mk.ln().abs() } else { T::zero() };
                    config.mu(k + 1).powf(d) + log_term
                } else if j > k {
                    (config.lambda(j) / lk).powf(d)
                } else {
                    delta * (lk / config.lambda(j)).powf(d - lit(2.0))
                };
                (measured, reference)
            })
            .collect();
        out.push(row);
    }
    Ok(out)
}

/// Ranges of the pointwise envelope ratios of `U` for one choice of `A₀`.
///
/// NLH: `|U| / |W_{;j}|` on `[A₀ λ̄_{j+1}, λ̄_j / A₀]`. HMHF: `|r^{-D} sin P| / [⟨y⟩^{-2D}]_{;j}`
/// on `[λ̄_{j+1} / A₀, A₀ λ̄_j]`. Here `λ̄_1 = ∞` and `λ̄_{J+1} = 0`, clipped to the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeReport<T> {
    pub kind: EquationKind,
    pub a0: T,
    /// Per level `j = 1..=J`: `(min, max)` of the ratio, `None` when the annulus holds no node.
    pub ratios: Vec<Option<(T, T)>>,
}

impl<T: Real> EnvelopeReport<T> {
    /// NLH needs the ratio within `[1/c, c]`, HMHF only needs it below `c`; every annulus
    /// must be nonempty.
    pub fn holds(&self, constant: T) -> bool {
        self.ratios.iter().all(|r| match (r, self.kind) {
            (Some((_, hi)), EquationKind::Hmhf { .. }) => *hi <= constant,
            (Some((lo, hi)), EquationKind::Nlh { .. }) => *lo * constant >= T::one() && *hi <= constant,
            (None, _) => false,
        })
    }
}

pub fn envelope_constants<T: Real>(profile: &ModifiedProfile<T>, a0: T) -> EnvelopeReport<T> {
    let kind = profile.kind;
    let cfg = &profile.config;
    let d = kind.d::<T>();
    let nodes = profile.u.grid().nodes();
    let upper = |j: usize| if j == 1 { T::infinity() } else { cfg.lambda_bar(j) };
    let lower = |j: usize| if j == cfg.len() { T::zero() } else { cfg.lambda_bar(j + 1) };
    let ratios = (1..=cfg.len())
        .map(|j| {
            let lam = cfg.lambda(j);
            let (from, to) = match kind {
                EquationKind::Nlh { .. } => (a0 * lower(j), upper(j) / a0),
                EquationKind::Hmhf { .. } => (lower(j) / a0, a0 * upper(j)),
            };
            nodes
                .iter()
                .enumerate()
                .filter(|(_, &r)| r >= from && r <= to)
                .map(|(i, &r)| {
                    let y = r / lam;
                    match kind {
                        EquationKind::Nlh { .. } => profile.u.values()[i].abs() * lam.powf(d) / kind.ground_u(y).abs(),
                        EquationKind::Hmhf { .. } => {
                            profile.p.values()[i].sin().abs() * (T::one() + y * y).powf(d) * (lam / r).powf(d)
                        }
                    }
                })
                .fold(None, |acc: Option<(T, T)>, x| Some(acc.map_or((x, x), |(lo, hi)| (lo.min(x), hi.max(x)))))
        })
        .collect();
    EnvelopeReport { kind, a0, ratios }
}

/// Smallest `A₀ = 10 · 2^{k/4}` for which the NLH envelopes hold with `constant`, scanning
/// until an annulus becomes empty. HMHF is rejected: its annuli grow with `A₀`, so its
/// constant grows like `A₀^{2D}` and no smallest value exists.
pub fn smallest_a0<T: Real>(profile: &ModifiedProfile<T>, constant: T) -> Result<Option<T>> {
    if let EquationKind::Hmhf { .. } = profile.kind {
        return Err(Error::Parameter("the smallest A₀ is only defined for the two-sided NLH envelope".into()));
    }
    Ok((0..=40)
        .map(|k| lit::<T>(10.0) * lit::<T>(2.0).powf(lit::<T>(k as f64 / 4.0)))
        .map(|a0| envelope_constants(profile, a0))
        .take_while(|rep| rep.ratios.iter().all(Option::is_some))
        .find(|rep| rep.holds(constant))
        .map(|rep| rep.a0))
}
