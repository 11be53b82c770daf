//! Time integration of the radial flows on the log grid with energy bookkeeping.
//!
//! Both equations are discretised as gradient flows in `s = ln r` for `v = r^D u`, with
//! `r² v_t = v_ss − D² v + f(v)`. The discrete energy is an exact Lyapunov functional of the
//! semi-discrete system.

use std::sync::Arc;

use crate::equation::EquationKind;
use crate::error::{Error, Result};
use crate::grid::{sphere_area, FieldKind, RadialField, RadialGrid};
use crate::real::{lit, Real};
use crate::tridiag;

/// Boundary behaviour of an evolving state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryClass {
    /// HMHF: `v(0) = ℓπ`, `v(∞) = mπ`.
    Topological { ell: i32, m: i32 },
    /// NLH: `r^D u = 0` at both edges; the innermost `u` node repeats its neighbour.
    Decaying,
}

impl BoundaryClass {
    /// Class of a field, reading HMHF end values to the nearest multiple of π.
    pub fn detect<T: Real>(kind: EquationKind, field: &RadialField<T>) -> Self {
        if kind.is_hmhf() {
            let v = field.values();
            let class = |x: T| (x / T::PI()).round().to_i32().unwrap_or(0);
            BoundaryClass::Topological { ell: class(v[0]), m: class(v[v.len() - 1]) }
        } else {
            BoundaryClass::Decaying
        }
    }
}

/// A state of the flow: `v` (v-type) for HMHF, `u` (u-type) for NLH.
#[derive(Debug, Clone)]
pub struct EvolutionState<T: Real> {
    pub t: T,
    pub field: RadialField<T>,
    pub boundary: BoundaryClass,
}

impl<T: Real> EvolutionState<T> {
    /// Builds a state from a u-type field, converting to `v = r^D u` for HMHF and pinning the
    /// boundary values to the class.
    pub fn from_u(kind: EquationKind, t: T, u: &RadialField<T>) -> Result<Self> {
        u.expect_kind(FieldKind::U)?;
        let field = if kind.is_hmhf() { u.to_v(kind.d())? } else { u.clone() };
        Self::new(kind, t, field)
    }

    pub fn new(kind: EquationKind, t: T, field: RadialField<T>) -> Result<Self> {
        field.expect_kind(if kind.is_hmhf() { FieldKind::V } else { FieldKind::U })?;
        let boundary = BoundaryClass::detect(kind, &field);
        let mut values = field.values().to_vec();
        let last = values.len() - 1;
        match boundary {
            BoundaryClass::Topological { ell, m } => {
                values[0] = lit::<T>(f64::from(ell)) * T::PI();
                values[last] = lit::<T>(f64::from(m)) * T::PI();
            }
            BoundaryClass::Decaying => {
                values[0] = values[1];
                values[last] = T::zero();
            }
        }
        let field = RadialField::new(field.grid().clone(), values, field.kind())?;
        Ok(Self { t, field, boundary })
    }

    /// The state as a u-type field.
    pub fn u(&self, kind: EquationKind) -> Result<RadialField<T>> {
        if kind.is_hmhf() {
            self.field.to_u(kind.d())
        } else {
            Ok(self.field.clone())
        }
    }

    /// Largest distance of the HMHF end values from their class values.
    pub fn boundary_error(&self) -> T {
        let v = self.field.values();
        match self.boundary {
            BoundaryClass::Topological { ell, m } => {
                let a = (v[0] - lit::<T>(f64::from(ell)) * T::PI()).abs();
                let b = (v[v.len() - 1] - lit::<T>(f64::from(m)) * T::PI()).abs();
                a.max(b)
            }
            BoundaryClass::Decaying => v[v.len() - 1].abs(),
        }
    }
}

/// Treatment of the nonlinearity in a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Implicit linear operator, explicit nonlinearity `r^{−(D+2)} f(r^D u)`; stable for
    /// `dt ≲ λ_J²`.
    Imex,
    /// Implicit Laplacian and linearised nonlinearity; the step is set by accuracy alone.
    LinearlyImplicit,
    /// `LinearlyImplicit` with one Richardson extrapolation, `2·(two half steps) − (one step)`:
    /// second order in time.
    Extrapolated,
}

/// Time-step selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepPolicy<T> {
    Fixed(T),
    /// Steps sized so that the sup-norm change per step, relative to the sup of the state,
    /// stays near `max_change`.
    Adaptive {
        initial: T,
        max_change: T,
        dt_max: T,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig<T> {
    pub scheme: Scheme,
    pub policy: StepPolicy<T>,
    pub t_end: T,
    /// Times at which full snapshots are stored, besides the initial and final states.
    pub snapshot_times: Vec<T>,
    pub max_steps: usize,
}

impl<T: Real> SolverConfig<T> {
    pub fn adaptive(t_end: T, max_change: T) -> Self {
        Self {
            scheme: Scheme::Extrapolated,
            policy: StepPolicy::Adaptive { initial: lit(1e-6), max_change, dt_max: T::infinity() },
            t_end,
            snapshot_times: vec![],
            max_steps: 2_000_000,
        }
    }

    /// Adds `per_decade` log-spaced snapshot times in `[t_first, t_end]`.
    pub fn with_log_snapshots(mut self, t_first: T, per_decade: usize) -> Self {
        let decades = (self.t_end / t_first).log10().as_f64();
        let count = (decades * per_decade as f64).ceil().max(1.0) as usize;
        self.snapshot_times =
            (0..=count).map(|k| t_first * (self.t_end / t_first).powf(lit(k as f64 / count as f64))).collect();
        self
    }

    fn validate(&self, t0: T) -> Result<()> {
        let ok = match self.policy {
            StepPolicy::Fixed(dt) => dt > T::zero(),
            StepPolicy::Adaptive { initial, max_change, dt_max } => {
                initial > T::zero() && max_change > T::zero() && dt_max > T::zero()
            }
        };
        if !ok {
            return Err(Error::Parameter("time steps and change tolerance must be positive".into()));
        }
        if !(self.t_end > t0) {
            return Err(Error::Parameter(format!("end time {} must exceed start time {t0}", self.t_end)));
        }
        Ok(())
    }
}

/// Per-step scalars.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord<T> {
    pub t: T,
    pub energy: T,
    /// `‖∂_t u‖²` of the semi-discrete flow at this state.
    pub velocity_sq: T,
    /// `‖δ‖²/dt` for the step that ended here, `δ` the state increment: the exact
    /// `∫‖∂_t u‖² dt` of the piecewise-linear-in-time trajectory over that step.
    pub step_dissipation: T,
}

/// A stored state with its velocity.
#[derive(Debug, Clone)]
pub struct Snapshot<T: Real> {
    pub state: EvolutionState<T>,
    pub velocity: Vec<T>,
    pub energy: T,
}

#[derive(Debug, Clone)]
pub struct Evolution<T: Real> {
    pub kind: EquationKind,
    pub history: Vec<StepRecord<T>>,
    pub snapshots: Vec<Snapshot<T>>,
    pub steps: usize,
    pub rejected: usize,
}

impl<T: Real> Evolution<T> {
    pub fn final_state(&self) -> &EvolutionState<T> {
        &self.snapshots[self.snapshots.len() - 1].state
    }
}

/// Discretisation data shared by every step on one grid.
///
/// Both kinds are evolved in `v = r^D u`, where the flow reads `r² v_t = v_ss − N(v)` with
/// `N(v) = D² v − f(v)`. The second derivative is the compact fourth-order operator
/// `A⁻¹δ²/h²` with `A = (1, 10, 1)/12`, which keeps every solve tridiagonal and makes
/// `E = ∫ ½ v_s² + P(v) ds` (with `P' = N`) an exact Lyapunov functional.
struct Operator<T> {
    kind: EquationKind,
    h: T,
    nodes: Vec<T>,
    /// Normalisation of the energy: `2π` (HMHF) or `|S^{N−1}|` (NLH).
    area: T,
    d2: T,
    /// `(A⁻¹ 1)` at the first and last interior node, for the boundary constant of the energy.
    edge_gain: (T, T),
}

impl<T: Real> Operator<T> {
    fn new(kind: EquationKind, grid: &RadialGrid<T>) -> Result<Self> {
        if grid.len() < 5 {
            return Err(Error::Parameter("evolution needs at least five nodes".into()));
        }
        let area = if kind.is_hmhf() { lit::<T>(2.0) * T::PI() } else { sphere_area::<T>(kind.n()) };
        let mut op = Self {
            kind,
            h: grid.h(),
            nodes: grid.nodes().to_vec(),
            area,
            d2: kind.d::<T>().powi(2),
            edge_gain: (T::one(), T::one()),
        };
        let n = op.nodes.len() - 2;
        let ones = op.solve_a(vec![T::one(); n])?;
        op.edge_gain = (ones[0], ones[n - 1]);
        Ok(op)
    }

    fn to_internal(&self, field: &RadialField<T>) -> Vec<T> {
        if self.kind.is_hmhf() {
            field.values().to_vec()
        } else {
            let d = self.kind.d::<T>();
            let mut x: Vec<T> = self.nodes.iter().zip(field.values()).map(|(&r, &u)| r.powf(d) * u).collect();
            x[0] = T::zero();
            x
        }
    }

    fn to_field(&self, grid: &Arc<RadialGrid<T>>, x: &[T]) -> Result<RadialField<T>> {
        if self.kind.is_hmhf() {
            RadialField::new(grid.clone(), x.to_vec(), FieldKind::V)
        } else {
            let mut u = self.state_values(x);
            u[0] = u[1];
            RadialField::new(grid.clone(), u, FieldKind::U)
        }
    }

    /// Converts internal values or velocities to the variable of the state field.
    fn state_values(&self, w: &[T]) -> Vec<T> {
        if self.kind.is_hmhf() {
            w.to_vec()
        } else {
            let d = self.kind.d::<T>();
            self.nodes.iter().zip(w).map(|(&r, &v)| v / r.powf(d)).collect()
        }
    }

    /// `P(v)`, `N(v) = P'(v)` and `N'(v)`.
    fn potential(&self, v: T) -> (T, T, T) {
        let d2 = self.d2;
        let half = lit::<T>(0.5);
        if self.kind.is_hmhf() {
            let two_v = v + v;
            (half * d2 * v.sin().powi(2), half * d2 * two_v.sin(), d2 * two_v.cos())
        } else {
            let p1 = self.kind.p::<T>() + T::one();
            let big_f = v.abs().powf(p1) / p1;
            (half * d2 * v * v - big_f, d2 * v - self.kind.f(v), d2 - self.kind.f_prime(v))
        }
    }

    /// Solves `A z = y` on the interior nodes.
    fn solve_a(&self, mut y: Vec<T>) -> Result<Vec<T>> {
        let n = y.len();
        let twelfth = lit::<T>(1.0 / 12.0);
        let off = vec![twelfth; n];
        let diag = vec![lit::<T>(10.0 / 12.0); n];
        let mut scratch = vec![T::zero(); n];
        tridiag::solve(&off, &diag, &off, &mut y, &mut scratch)?;
        Ok(y)
    }

    /// `δ² x + c·b` on the interior, `b` carrying the pinned end values.
    fn second_difference(&self, x: &[T], c: T) -> Vec<T> {
        let m = x.len();
        (1..m - 1)
            .map(|i| {
                let mut v = x[i - 1] + x[i + 1] - x[i] - x[i];
                if i == 1 {
                    v += (c - T::one()) * x[0];
                }
                if i == m - 2 {
                    v += (c - T::one()) * x[m - 1];
                }
                v
            })
            .collect()
    }

    /// Velocity `v_t` of the semi-discrete flow; zero at the pinned ends.
    fn velocity(&self, x: &[T]) -> Result<Vec<T>> {
        let m = x.len();
        let h2 = self.h * self.h;
        let z = self.solve_a(self.second_difference(x, T::one()))?;
        let mut out = vec![T::zero(); m];
        for i in 1..m - 1 {
            let r = self.nodes[i];
            out[i] = (z[i - 1] / h2 - self.potential(x[i]).1) / (r * r);
        }
        Ok(out)
    }

    /// `‖w‖² = area ∫ r² w² ds`, equal to `‖u_t‖²_{L²}` for internal velocities.
    fn norm_sq(&self, w: &[T]) -> T {
        self.area * self.h * w.iter().zip(&self.nodes).map(|(&a, &r)| r * r * a * a).sum::<T>()
    }

    fn energy(&self, x: &[T]) -> Result<T> {
        let m = x.len();
        let z = self.solve_a(self.second_difference(x, lit(2.0)))?;
        let quad: T = x[1..m - 1].iter().zip(&z).map(|(&a, &b)| a * b).sum();
        let edges = self.edge_gain.0 * x[0] * x[0] + self.edge_gain.1 * x[m - 1] * x[m - 1];
        let dirichlet = (edges - quad) / (self.h + self.h);
        let potential: T = x.iter().map(|&v| self.h * self.potential(v).0).sum();
        Ok(self.area * (dirichlet + potential))
    }

    /// One step from `x`; returns the new values.
    fn step(&self, x: &[T], dt: T, scheme: Scheme) -> Result<Vec<T>> {
        if scheme != Scheme::Extrapolated {
            return self.euler(x, dt, scheme);
        }
        let half = dt * lit(0.5);
        let full = self.euler(x, dt, Scheme::LinearlyImplicit)?;
        let halves = self.euler(&self.euler(x, half, Scheme::LinearlyImplicit)?, half, Scheme::LinearlyImplicit)?;
        Ok(halves.iter().zip(&full).map(|(&a, &b)| a + a - b).collect())
    }

    /// One linearly implicit or IMEX Euler step.
    fn euler(&self, x: &[T], dt: T, scheme: Scheme) -> Result<Vec<T>> {
        let m = x.len();
        let n = m - 2;
        let h2 = self.h * self.h;
        let (a_off, a_diag) = (lit::<T>(1.0 / 12.0), lit::<T>(10.0 / 12.0));
        // Row k of A(R²/dt + θ) and of A(R² x/dt − N + θ x), θ the implicit part of N'.
        let coef: Vec<T> = (1..m - 1)
            .map(|i| {
                let r = self.nodes[i];
                let (_, _, dn) = self.potential(x[i]);
                let theta = if scheme == Scheme::LinearlyImplicit { dn } else { self.d2 };
                r * r / dt + theta
            })
            .collect();
        let src: Vec<T> = (1..m - 1)
            .map(|i| {
                let r = self.nodes[i];
                let (_, nv, dn) = self.potential(x[i]);
                let theta = if scheme == Scheme::LinearlyImplicit { dn } else { self.d2 };
                r * r * x[i] / dt - nv + theta * x[i]
            })
            .collect();
        let inv_h2 = T::one() / h2;
        let mut lower = vec![T::zero(); n];
        let mut diag = vec![T::zero(); n];
        let mut upper = vec![T::zero(); n];
        let mut rhs = vec![T::zero(); n];
        for k in 0..n {
            diag[k] = a_diag * coef[k] + lit::<T>(2.0) * inv_h2;
            rhs[k] = a_diag * src[k];
            if k > 0 {
                lower[k] = a_off * coef[k - 1] - inv_h2;
                rhs[k] += a_off * src[k - 1];
            }
            if k + 1 < n {
                upper[k] = a_off * coef[k + 1] - inv_h2;
                rhs[k] += a_off * src[k + 1];
            }
        }
        rhs[0] += x[0] * inv_h2;
        rhs[n - 1] += x[m - 1] * inv_h2;
        let reference = rhs.clone();
        let mut scratch = vec![T::zero(); n];
        tridiag::solve(&lower, &diag, &upper, &mut rhs, &mut scratch)?;
        let scale = reference.iter().fold(T::zero(), |a, &b| a.max(b.abs())).max(T::min_positive_value());
        let residual = (0..n).fold(T::zero(), |acc, k| {
            let mut row = diag[k] * rhs[k];
            if k > 0 {
                row += lower[k] * rhs[k - 1];
            }
            if k + 1 < n {
                row += upper[k] * rhs[k + 1];
            }
            acc.max((row - reference[k]).abs())
        });
        if !(residual <= lit::<T>(1e-10) * scale) {
            return Err(Error::SchemeBlowUp(residual.as_f64()));
        }
        let mut out = x.to_vec();
        out[1..m - 1].copy_from_slice(&rhs);
        Ok(out)
    }
}

/// Energy of the discrete system, normalised like the continuum energy.
pub fn discrete_energy<T: Real>(kind: EquationKind, state: &EvolutionState<T>) -> Result<T> {
    let op = Operator::new(kind, state.field.grid())?;
    op.energy(&op.to_internal(&state.field))
}

/// Velocity of the semi-discrete flow at a state, in the variable of the state field.
pub fn velocity<T: Real>(kind: EquationKind, state: &EvolutionState<T>) -> Result<Vec<T>> {
    let op = Operator::new(kind, state.field.grid())?;
    Ok(op.state_values(&op.velocity(&op.to_internal(&state.field))?))
}

/// Advances one step of size `dt`.
pub fn step<T: Real>(
    kind: EquationKind,
    state: &EvolutionState<T>,
    dt: T,
    scheme: Scheme,
) -> Result<EvolutionState<T>> {
    let op = Operator::new(kind, state.field.grid())?;
    let next = op.step(&op.to_internal(&state.field), dt, scheme)?;
    check_finite(&next, state.t + dt)?;
    Ok(EvolutionState { t: state.t + dt, field: op.to_field(state.field.grid(), &next)?, boundary: state.boundary })
}

fn check_finite<T: Real>(values: &[T], t: T) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::SchemeBlowUp(t.as_f64()));
    }
    Ok(())
}

/// Runs the flow from `initial` to `cfg.t_end`, storing per-step records and snapshots.
pub fn evolve<T: Real>(kind: EquationKind, initial: &EvolutionState<T>, cfg: &SolverConfig<T>) -> Result<Evolution<T>> {
    cfg.validate(initial.t)?;
    let grid: Arc<RadialGrid<T>> = initial.field.grid().clone();
    let op = Operator::new(kind, &grid)?;
    let mut x = op.to_internal(&initial.field);
    let blow_up = lit::<T>(1e12) * sup(&x).max(T::one());
    let mut t = initial.t;
    let record = |t: T, x: &[T], step_dissipation: T| -> Result<(StepRecord<T>, Vec<T>)> {
        let vel = op.velocity(x)?;
        Ok((StepRecord { t, energy: op.energy(x)?, velocity_sq: op.norm_sq(&vel), step_dissipation }, vel))
    };
    let snapshot = |t: T, x: &[T], rec: &StepRecord<T>, vel: Vec<T>| -> Result<Snapshot<T>> {
        let field = op.to_field(&grid, x)?;
        let velocity = op.state_values(&vel);
        Ok(Snapshot { state: EvolutionState { t, field, boundary: initial.boundary }, velocity, energy: rec.energy })
    };
    let (rec, vel) = record(t, &x, T::zero())?;
    let mut history = vec![rec];
    let mut snapshots = vec![snapshot(t, &x, &rec, vel)?];
    let mut pending: Vec<T> = cfg.snapshot_times.iter().copied().filter(|&s| s > t && s < cfg.t_end).collect();
    pending.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    pending.dedup();
    pending.push(cfg.t_end);
    let mut next_stop = 0usize;
    let mut dt = match cfg.policy {
        StepPolicy::Fixed(dt) => dt,
        StepPolicy::Adaptive { initial, .. } => initial,
    };
    let (mut steps, mut rejected) = (0usize, 0usize);
    while next_stop < pending.len() {
        if steps >= cfg.max_steps {
            return Err(Error::StepUnderflow(t.as_f64()));
        }
        let target = pending[next_stop];
        let landing = t + dt >= target * (T::one() - lit(1e-12));
        let trial = if landing { target - t } else { dt };
        let next = op.step(&x, trial, cfg.scheme)?;
        check_finite(&next, t + trial)?;
        if sup(&next) > blow_up {
            return Err(Error::SchemeBlowUp((t + trial).as_f64()));
        }
        if let StepPolicy::Adaptive { max_change, dt_max, .. } = cfg.policy {
            let change = next.iter().zip(&x).fold(T::zero(), |a, (&p, &q)| a.max((p - q).abs()))
                / sup(&x).max(T::min_positive_value());
            if change > max_change + max_change && trial > T::epsilon() * t.abs().max(T::one()) {
                rejected += 1;
                dt = trial * lit(0.5);
                continue;
            }
            let factor = if change == T::zero() {
                lit(1.25)
            } else {
                (lit::<T>(0.9) * max_change / change).min(lit(1.25)).max(lit(0.3))
            };
            if !landing {
                dt = (trial * factor).min(dt_max);
            } else {
                dt = dt.max(trial * factor).min(dt_max);
            }
        }
        let increment: Vec<T> = next.iter().zip(&x).map(|(&a, &b)| a - b).collect();
        let step_dissipation = op.norm_sq(&increment) / trial;
        t = if landing { target } else { t + trial };
        x = next;
        steps += 1;
        let (rec, vel) = record(t, &x, step_dissipation)?;
        history.push(rec);
        if landing {
            snapshots.push(snapshot(t, &x, &rec, vel)?);
            next_stop += 1;
        }
    }
    Ok(Evolution { kind, history, snapshots, steps, rejected })
}

fn sup<T: Real>(x: &[T]) -> T {
    x.iter().fold(T::zero(), |a, &b| a.max(b.abs()))
}

/// Energy identity and monotonicity over a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyAudit<T> {
    /// `E(t_first) − E(t_last)`.
    pub energy_drop: T,
    /// `∫ ‖∂_t u‖² dt` of the computed trajectory, summed over steps.
    pub dissipation: T,
    /// The same integral by the trapezoidal rule on the semi-discrete velocities.
    pub dissipation_trapezoid: T,
    /// `|drop − dissipation| / |drop|`.
    pub discrepancy: T,
    /// Largest single-step energy increase relative to `|E|`.
    pub max_increase: T,
}

impl<T: Real> EnergyAudit<T> {
    /// Nonincreasing energy up to one part in `10⁴` per step.
    pub fn monotone(&self) -> bool {
        self.max_increase <= lit(1e-4)
    }
}

pub fn energy_audit<T: Real>(history: &[StepRecord<T>]) -> Result<EnergyAudit<T>> {
    if history.len() < 2 {
        return Err(Error::Parameter("energy audit needs at least two records".into()));
    }
    let first = history[0];
    let last = history[history.len() - 1];
    let energy_drop = first.energy - last.energy;
    let dissipation: T = history[1..].iter().map(|r| r.step_dissipation).sum();
    let dissipation_trapezoid: T =
        history.windows(2).map(|w| (w[1].t - w[0].t) * (w[0].velocity_sq + w[1].velocity_sq) * lit(0.5)).sum();
    let discrepancy = if energy_drop == T::zero() {
        if dissipation == T::zero() {
            T::zero()
        } else {
            T::infinity()
        }
    } else {
        ((energy_drop - dissipation) / energy_drop).abs()
    };
    let max_increase = history
        .windows(2)
        .map(|w| (w[1].energy - w[0].energy) / w[0].energy.abs().max(T::min_positive_value()))
        .fold(T::zero(), |a, b| a.max(b));
    Ok(EnergyAudit { energy_drop, dissipation, dissipation_trapezoid, discrepancy, max_increase })
}

/// Running integrals of `𝒟` and `‖g‖²_{Ḣ²}` over fitted snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct SpacetimeReport<T> {
    pub times: Vec<T>,
    pub running_d: Vec<T>,
    pub running_g: Vec<T>,
    pub d_levels: bool,
    pub g_levels: bool,
}

/// A running integral levels off when its growth over the final decade is below 10% of the
/// total and below the growth over the preceding decade.
pub fn levels_off<T: Real>(times: &[T], running: &[T]) -> bool {
    let (Some(&t_end), Some(&total)) = (times.last(), running.last()) else {
        return false;
    };
    if total == T::zero() {
        return true;
    }
    let at = |t: T| {
        let k = times.iter().position(|&s| s >= t).unwrap_or(times.len() - 1);
        running[k]
    };
    let ten = lit::<T>(10.0);
    if times[0] > t_end / (ten * ten) {
        return false;
    }
    let last = total - at(t_end / ten);
    let previous = at(t_end / ten) - at(t_end / (ten * ten));
    last <= lit::<T>(0.1) * total && last <= previous
}

/// Accumulates `∫(𝒟 + ‖g‖²_{Ḣ²}) dt` with the trapezoidal rule.
pub fn spacetime_monitor<T: Real>(times: &[T], d_values: &[T], g_h2_sq: &[T]) -> Result<SpacetimeReport<T>> {
    if times.len() != d_values.len() || times.len() != g_h2_sq.len() || times.len() < 2 {
        return Err(Error::Parameter("spacetime monitor needs matching series of length ≥ 2".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Parameter("snapshot times must increase".into()));
    }
    let running = |vals: &[T]| {
        let mut out = vec![T::zero()];
        for k in 1..times.len() {
            let inc = (times[k] - times[k - 1]) * (vals[k] + vals[k - 1]) * lit(0.5);
            out.push(out[k - 1] + inc);
        }
        out
    };
    let running_d = running(d_values);
    let running_g = running(g_h2_sq);
    Ok(SpacetimeReport {
        d_levels: levels_off(times, &running_d),
        g_levels: levels_off(times, &running_g),
        times: times.to_vec(),
        running_d,
        running_g,
    })
}
