//! Leading-order modulation ODE `λ_j' = κ ῑ_j μ_j^D / λ_j`, its integration, the sign
//! classification and power-law rate fits.

use crate::constants::RateTable;
use crate::equation::EquationKind;
use crate::error::{Error, Result};
use crate::ode::Dopri;
use crate::real::{lit, Real};

/// Scale ratio above which the bubbles are declared to have collided.
pub const COLLISION_RATIO: f64 = 0.5;

/// `λ ≈ prefactor · t^{-exponent}` from a least-squares fit in log-log coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLaw<T> {
    pub exponent: T,
    pub prefactor: T,
}

/// Least squares on `(ln t, ln λ)` over the samples with `t ≥ t_from`.
pub fn fit_power_law<T: Real>(times: &[T], values: &[T], t_from: T) -> Result<PowerLaw<T>> {
    if times.len() != values.len() {
        return Err(Error::Parameter("times and values differ in length".into()));
    }
    let pts: Vec<(T, T)> = times
        .iter()
        .zip(values)
        .filter(|(&t, &v)| t >= t_from && t > T::zero() && v > T::zero())
        .map(|(&t, &v)| (t.ln(), v.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Degenerate(format!("{} usable samples for a power-law fit", pts.len())));
    }
    let m = lit::<T>(pts.len() as f64);
    let mx = pts.iter().map(|p| p.0).sum::<T>() / m;
    let my = pts.iter().map(|p| p.1).sum::<T>() / m;
    let sxx: T = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: T = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == T::zero() {
        return Err(Error::Degenerate("all fit times coincide".into()));
    }
    let slope = sxy / sxx;
    Ok(PowerLaw { exponent: -slope, prefactor: (my - slope * mx).exp() })
}

/// `dλ_j/dt = κ ῑ_j μ_j^D / λ_j` with `μ_1 = 0` and `ῑ_j = ι_{j-1} ι_j`.
pub fn ode_rhs<T: Real>(kind: EquationKind, kappa: T, iotas: &[i8], lambdas: &[T], out: &mut [T]) {
    let d = kind.d::<T>();
    for j in 0..lambdas.len() {
        out[j] = if j == 0 {
            T::zero()
        } else {
            let iota_bar = lit::<T>(f64::from(iotas[j] * iotas[j - 1]));
            let mu = lambdas[j] / lambdas[j - 1];
            kappa * iota_bar * mu.powf(d) / lambdas[j]
        };
    }
}

/// Solution of the modulation ODE sampled on a log-spaced time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleTrajectory<T> {
    pub kind: EquationKind,
    pub iotas: Vec<i8>,
    pub kappa: T,
    pub times: Vec<T>,
    pub scales: Vec<Vec<T>>,
    /// Time at which some `μ_j` first exceeded [`COLLISION_RATIO`].
    pub collision: Option<T>,
    /// Per-bubble fits on the final decade; empty after a collision.
    pub fitted: Vec<PowerLaw<T>>,
}

impl<T: Real> ScaleTrajectory<T> {
    pub fn bubbles(&self) -> usize {
        self.iotas.len()
    }

    /// History of `λ_j` for 1-based `j`.
    pub fn series(&self, j: usize) -> Vec<T> {
        self.scales.iter().map(|s| s[j - 1]).collect()
    }

    pub fn collided(&self) -> bool {
        self.collision.is_some()
    }

    /// Relative deviations of the fitted exponents and prefactors from a rate table.
    pub fn deviations(&self, table: &RateTable<T>) -> Vec<(T, T)> {
        self.fitted
            .iter()
            .enumerate()
            .map(|(i, fit)| {
                let alpha = table.alphas[i];
                let dev_exp =
                    if alpha == T::zero() { fit.exponent.abs() } else { (fit.exponent / alpha - T::one()).abs() };
                (dev_exp, (fit.prefactor / table.prefactor(i + 1) - T::one()).abs())
            })
            .collect()
    }
}

/// Integrates the ODE in `ln λ` from `t_span.0` to `t_span.1` with relative tolerance `1e-9`.
pub fn integrate_scales<T: Real>(
    kind: EquationKind,
    kappa: T,
    iotas: &[i8],
    initial: &[T],
    t_span: (T, T),
    samples_per_decade: usize,
) -> Result<ScaleTrajectory<T>> {
    let (t0, t1) = t_span;
    if !(t0 > T::zero()) || !(t1 > t0) {
        return Err(Error::Parameter(format!("time span must satisfy 0 < t0 < t1, got ({t0}, {t1})")));
    }
    if iotas.len() != initial.len() || iotas.is_empty() {
        return Err(Error::Parameter("one sign per initial scale is required".into()));
    }
    if iotas.iter().any(|&s| s != 1 && s != -1) {
        return Err(Error::Parameter("signs must be ±1".into()));
    }
    if initial.iter().any(|&l| !(l > T::zero())) || initial.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Parameter("initial scales must be positive and strictly decreasing".into()));
    }
    let j = initial.len();
    let decades = (t1 / t0).log10().as_f64();
    let count = ((decades * samples_per_decade.max(1) as f64).ceil() as usize).max(2);
    let times: Vec<T> =
        (0..=count).map(|k| if k == count { t1 } else { t0 * (t1 / t0).powf(lit(k as f64 / count as f64)) }).collect();
    let rhs = |_t: T, logs: &[T], out: &mut [T]| {
        let lambdas: Vec<T> = logs.iter().map(|l| l.exp()).collect();
        ode_rhs(kind, kappa, iotas, &lambdas, out);
        for (o, l) in out.iter_mut().zip(&lambdas) {
            *o /= *l;
        }
    };
    let ratio = lit::<T>(COLLISION_RATIO);
    let collided = |logs: &[T]| logs.windows(2).any(|w| (w[1] - w[0]).exp() > ratio);
    let solver = Dopri::new(lit(1e-9), lit(1e-12));
    let mut state: Vec<T> = initial.iter().map(|l| l.ln()).collect();
    let mut scales = vec![initial.to_vec()];
    let mut collision = None;
    for w in times.windows(2) {
        let mut hit = None;
        let (t_end, y) = solver.run(rhs, w[0], &state, w[1], (w[1] - w[0]) * lit(0.1), |t, y| {
            if collided(y) {
                hit = Some(t);
                false
            } else {
                true
            }
        })?;
        state = y;
        if let Some(t) = hit {
            collision = Some(t);
            let mut kept: Vec<T> = times[..scales.len()].to_vec();
            kept.push(t_end);
            scales.push(state.iter().map(|l| l.exp()).collect());
            return Ok(ScaleTrajectory {
                kind,
                iotas: iotas.to_vec(),
                kappa,
                times: kept,
                scales,
                collision,
                fitted: vec![],
            });
        }
        scales.push(state.iter().map(|l| l.exp()).collect());
    }
    let t_from = t1 / lit(10.0);
    let mut fitted = Vec::with_capacity(j);
    for b in 0..j {
        let series: Vec<T> = scales.iter().map(|s| s[b]).collect();
        fitted.push(fit_power_law(&times, &series, t_from)?);
    }
    Ok(ScaleTrajectory { kind, iotas: iotas.to_vec(), kappa, times, scales, collision, fitted })
}

/// Sign patterns with `ῑ_j κ < 0` for every `j ≥ 2`; both members of each global-sign class.
pub fn classify_signs(kind: EquationKind, bubbles: usize) -> Vec<Vec<i8>> {
    // HMHF has κ < 0, NLH has κ > 0.
    let step: i8 = if kind.is_hmhf() { 1 } else { -1 };
    [1i8, -1]
        .iter()
        .map(|&first| {
            let mut pattern = vec![first];
            for j in 1..bubbles {
                pattern.push(pattern[j - 1] * step);
            }
            pattern
        })
        .collect()
}

/// Whether `iotas` satisfies `ῑ_j κ < 0` for all `j ≥ 2`.
pub fn is_admissible<T: Real>(kappa: T, iotas: &[i8]) -> bool {
    iotas.windows(2).all(|w| lit::<T>(f64::from(w[0] * w[1])) * kappa < T::zero())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{kappa_explicit, rates};

    fn hmhf3() -> EquationKind {
        EquationKind::hmhf(3).unwrap()
    }

    #[test]
    fn single_bubble_is_static() {
        let mut out = [1.0f64];
        ode_rhs(hmhf3(), -9.9, &[1], &[2.0], &mut out);
        assert_eq!(out[0], 0.0);
    }

    #[test]
    fn admissible_signs_shrink_the_inner_bubble() {
        let mut out = [0.0f64; 2];
        ode_rhs(EquationKind::nlh(8).unwrap(), 7.0, &[1, -1], &[1.0, 0.1], &mut out);
        assert!(out[1] < 0.0);
        ode_rhs(hmhf3(), -9.9, &[1, 1], &[1.0, 0.1], &mut out);
        assert!(out[1] < 0.0);
    }

    #[test]
    fn sign_classes() {
        let nlh = EquationKind::nlh(8).unwrap();
        assert_eq!(classify_signs(nlh, 2), vec![vec![1, -1], vec![-1, 1]]);
        assert_eq!(classify_signs(hmhf3(), 2), vec![vec![1, 1], vec![-1, -1]]);
        assert_eq!(classify_signs(nlh, 1), vec![vec![1], vec![-1]]);
        assert!(is_admissible(7.0f64, &[1, -1, 1]));
        assert!(!is_admissible(7.0f64, &[1, 1]));
    }

    #[test]
    fn power_law_fit_recovers_exact_data() {
        let ts: Vec<f64> = (0..50).map(|k| 10f64.powf(k as f64 / 10.0)).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 3.0 * t.powf(-1.5)).collect();
        let fit = fit_power_law(&ts, &ys, 1.0).unwrap();
        assert!((fit.exponent - 1.5).abs() < 1e-12);
        assert!((fit.prefactor - 3.0).abs() < 1e-10);
    }

    #[test]
    fn two_bubble_rate_matches_closed_form() {
        // With λ₁ = 1 and D = 3 the ODE is λ₂' = κ λ₂², so 1/λ₂ = 1/λ₂(1) - κ (t - 1).
        let k = hmhf3();
        let kappa: f64 = kappa_explicit(k).unwrap();
        let traj = integrate_scales(k, kappa, &[1, 1], &[1.0, 0.05], (1.0, 1e4), 20).unwrap();
        for (t, s) in traj.times.iter().zip(&traj.scales) {
            let exact = 1.0 / (20.0 - kappa * (t - 1.0));
            assert!((s[1] / exact - 1.0).abs() < 1e-7, "t={t}");
            assert_eq!(s[0], 1.0);
        }
        let table = rates(k, kappa, 2, 1.0).unwrap();
        let dev = traj.deviations(&table);
        assert!(dev[1].0 < 0.02 && dev[1].1 < 0.05, "{dev:?}");
    }

    #[test]
    fn three_bubble_exponents() {
        let k = hmhf3();
        let kappa: f64 = kappa_explicit(k).unwrap();
        let traj = integrate_scales(k, kappa, &[1, 1, 1], &[1.0, 0.05, 0.0025], (1.0, 1e4), 20).unwrap();
        let table = rates(k, kappa, 3, 1.0).unwrap();
        let dev = traj.deviations(&table);
        assert!(dev[0].0 < 1e-12);
        assert!(dev[1].0 < 0.02 && dev[2].0 < 0.02, "{dev:?} {:?}", traj.fitted);
        assert!(dev[1].1 < 0.05 && dev[2].1 < 0.05, "{dev:?} {:?}", traj.fitted);
    }

    #[test]
    fn inadmissible_signs_collide() {
        let traj = integrate_scales(hmhf3(), -9.9f64, &[1, -1], &[1.0, 0.05], (1.0, 1e4), 10).unwrap();
        assert!(traj.collided());
        assert!(traj.fitted.is_empty());
    }
}
