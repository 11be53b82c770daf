//! Dormand–Prince 5(4) integrator with adaptive steps.

use crate::error::{Error, Result};
use crate::real::{lit, Real};

/// Adaptive explicit Runge–Kutta settings.
#[derive(Debug, Clone, Copy)]
pub struct Dopri<T> {
    pub rtol: T,
    pub atol: T,
    pub max_steps: usize,
}

impl<T: Real> Dopri<T> {
    pub fn new(rtol: T, atol: T) -> Self {
        Self { rtol, atol, max_steps: 5_000_000 }
    }

    /// Integrates `y' = f(t, y)` from `t0` to `t1`.
    ///
    /// `observe(t, y)` runs after every accepted step; returning `false` stops early.
    /// Returns the final time and state.
    pub fn run(
        &self,
        mut f: impl FnMut(T, &[T], &mut [T]),
        t0: T,
        y0: &[T],
        t1: T,
        h0: T,
        mut observe: impl FnMut(T, &[T]) -> bool,
    ) -> Result<(T, Vec<T>)> {
        let n = y0.len();
        let c = |x: f64| lit::<T>(x);
        let a21 = c(1.0 / 5.0);
        let (a31, a32) = (c(3.0 / 40.0), c(9.0 / 40.0));
        let (a41, a42, a43) = (c(44.0 / 45.0), c(-56.0 / 15.0), c(32.0 / 9.0));
        let (a51, a52, a53, a54) = (c(19372.0 / 6561.0), c(-25360.0 / 2187.0), c(64448.0 / 6561.0), c(-212.0 / 729.0));
        let (a61, a62, a63, a64, a65) =
            (c(9017.0 / 3168.0), c(-355.0 / 33.0), c(46732.0 / 5247.0), c(49.0 / 176.0), c(-5103.0 / 18656.0));
        let (b1, b3, b4, b5, b6) =
            (c(35.0 / 384.0), c(500.0 / 1113.0), c(125.0 / 192.0), c(-2187.0 / 6784.0), c(11.0 / 84.0));
        let (e1, e3, e4, e5, e6, e7) = (
            c(71.0 / 57600.0),
            c(-71.0 / 16695.0),
            c(71.0 / 1920.0),
            c(-17253.0 / 339200.0),
            c(22.0 / 525.0),
            c(-1.0 / 40.0),
        );
        let dir = if t1 >= t0 { T::one() } else { -T::one() };
        let mut t = t0;
        let mut y = y0.to_vec();
        let mut h = h0.abs().max(T::epsilon()) * dir;
        let mut k = vec![vec![T::zero(); n]; 7];
        let mut tmp = vec![T::zero(); n];
        let mut ynew = vec![T::zero(); n];
        f(t, &y, &mut k[0]);
        let mut steps = 0usize;
        while (t1 - t) * dir > T::zero() {
            steps += 1;
            if steps > self.max_steps {
                return Err(Error::StepUnderflow(t.as_f64()));
            }
            if (t + h - t1) * dir > T::zero() {
                h = t1 - t;
            }
            macro_rules! stage {
                ($dst:expr, $tc:expr, $($coef:expr, $ki:expr),+) => {{
                    for i in 0..n {
                        tmp[i] = y[i] + h * (T::zero() $(+ $coef * k[$ki][i])+);
                    }
                    let (head, tail) = k.split_at_mut($dst);
                    let _ = head;
                    f(t + $tc * h, &tmp, &mut tail[0]);
                }};
            }
            stage!(1, c(0.2), a21, 0);
            stage!(2, c(0.3), a31, 0, a32, 1);
            stage!(3, c(0.8), a41, 0, a42, 1, a43, 2);
            stage!(4, c(8.0 / 9.0), a51, 0, a52, 1, a53, 2, a54, 3);
            stage!(5, T::one(), a61, 0, a62, 1, a63, 2, a64, 3, a65, 4);
            for i in 0..n {
                ynew[i] = y[i] + h * (b1 * k[0][i] + b3 * k[2][i] + b4 * k[3][i] + b5 * k[4][i] + b6 * k[5][i]);
            }
            {
                let (head, tail) = k.split_at_mut(6);
                let _ = head;
                f(t + h, &ynew, &mut tail[0]);
            }
            let mut err = T::zero();
            for i in 0..n {
                let ei = h * (e1 * k[0][i] + e3 * k[2][i] + e4 * k[3][i] + e5 * k[4][i] + e6 * k[5][i] + e7 * k[6][i]);
                let sc = self.atol + self.rtol * y[i].abs().max(ynew[i].abs());
                let r = ei / sc;
                err += r * r;
            }
            err = (err / lit(n.max(1) as f64)).sqrt();
            if !err.is_finite() {
                h *= lit(0.2);
                if h.abs() <= T::epsilon() * t.abs().max(T::one()) {
                    return Err(Error::StepUnderflow(t.as_f64()));
                }
                continue;
            }
            if err <= T::one() {
                t += h;
                std::mem::swap(&mut y, &mut ynew);
                let last = k[6].clone();
                k[0].copy_from_slice(&last);
                if !observe(t, &y) {
                    return Ok((t, y));
                }
                let fac = if err == T::zero() { lit(5.0) } else { (lit::<T>(0.9) * err.powf(lit(-0.2))).min(lit(5.0)) };
                h *= fac;
            } else {
                let fac = (lit::<T>(0.9) * err.powf(lit(-0.2))).max(lit(0.2));
                h *= fac;
                if h.abs() <= T::epsilon() * lit::<T>(16.0) * t.abs().max(T::one()) {
                    return Err(Error::StepUnderflow(t.as_f64()));
                }
            }
        }
        Ok((t, y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator() {
        let solver = Dopri::new(1e-11, 1e-13);
        let (_, y) = solver
            .run(
                |_t, y: &[f64], dy| {
                    dy[0] = y[1];
                    dy[1] = -y[0];
                },
                0.0,
                &[1.0, 0.0],
                10.0,
                1e-3,
                |_, _| true,
            )
            .unwrap();
        assert!((y[0] - 10f64.cos()).abs() < 1e-9);
        assert!((y[1] + 10f64.sin()).abs() < 1e-9);
    }

    #[test]
    fn backward_direction() {
        let solver = Dopri::new(1e-11, 1e-13);
        let (t, y) = solver.run(|_t, y: &[f64], dy| dy[0] = y[0], 1.0, &[1.0], 0.0, 1e-3, |_, _| true).unwrap();
        assert_eq!(t, 0.0);
        assert!((y[0] - (-1f64).exp()).abs() < 1e-10);
    }
}
