//! Randomized checks of the pointwise nonlinearity estimates.
//!
//! Each estimate has the form `|lhs| ≤ C · rhs`. The reference constant `C` is analytic
//! for HMHF. For NLH it is the supremum of the homogeneous one-variable ratio, found by a
//! dense logarithmic scan with golden-section refinement. A sample violates the estimate
//! when its ratio exceeds the reference by more than a relative `1e-9`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::equation::EquationKind;
use crate::error::{Error, Result};

/// Relative slack allowed over the reference constant.
const SLACK: f64 = 1e-9;
/// Largest tuple length drawn for the multi-bubble derivative estimate.
const MAX_TUPLE: usize = 5;

/// Outcome for one estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct InequalityCheck {
    pub name: &'static str,
    pub statement: &'static str,
    pub samples: usize,
    pub max_ratio: f64,
    pub reference: f64,
    pub violations: usize,
}

impl InequalityCheck {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.max_ratio.is_finite()
    }
}

/// All estimates for one equation.
#[derive(Debug, Clone, PartialEq)]
pub struct InequalityReport {
    pub kind: EquationKind,
    pub seed: u64,
    pub checks: Vec<InequalityCheck>,
}

impl InequalityReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(InequalityCheck::passed)
    }
}

type Ratio = Box<dyn Fn(&mut ChaCha8Rng) -> f64>;

struct Estimate {
    name: &'static str,
    statement: &'static str,
    reference: f64,
    ratio: Ratio,
}

/// Samples every estimate `samples` times with a seeded generator.
pub fn check_f_inequalities(kind: EquationKind, samples: usize, seed: u64) -> Result<InequalityReport> {
    if samples == 0 {
        return Err(Error::Parameter("at least one sample is required".into()));
    }
    let estimates = if kind.is_hmhf() { hmhf_estimates(kind) } else { nlh_estimates(kind) };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let checks = estimates
        .into_iter()
        .map(|e| {
            let mut max_ratio = 0.0f64;
            let mut violations = 0;
            for _ in 0..samples {
                let r = (e.ratio)(&mut rng);
                if !r.is_finite() || r > e.reference * (1.0 + SLACK) {
                    violations += 1;
                }
                max_ratio = max_ratio.max(r);
            }
            InequalityCheck {
                name: e.name,
                statement: e.statement,
                samples,
                max_ratio,
                reference: e.reference,
                violations,
            }
        })
        .collect();
    Ok(InequalityReport { kind, seed, checks })
}

/// `lhs / rhs`, with `0/0 = 0`.
fn quotient(lhs: f64, rhs: f64) -> f64 {
    if lhs == 0.0 {
        0.0
    } else {
        lhs / rhs
    }
}

fn signed_log_uniform(rng: &mut ChaCha8Rng, decades: f64) -> f64 {
    let mag = 10f64.powf(rng.gen_range(-decades..decades));
    if rng.gen_bool(0.5) {
        mag
    } else {
        -mag
    }
}

fn hmhf_estimates(kind: EquationKind) -> Vec<Estimate> {
    let d2 = kind.d::<f64>().powi(2);
    let f = move |v: f64| kind.f(v);
    let fp = move |v: f64| kind.f_prime(v);
    let angle = |rng: &mut ChaCha8Rng| rng.gen_range(-2.0 * std::f64::consts::TAU..2.0 * std::f64::consts::TAU);
    vec![
        Estimate {
            name: "taylor-quadratic",
            statement: "|f(a+b)-f(a)-f'(a)b| <= C|b|^2 for |b| <= 1",
            reference: 5.0 * d2 / 3.0,
            ratio: Box::new(move |rng| {
                let a = angle(rng);
                let b = rng.gen_range(-1.0..1.0);
                quotient((f(a + b) - f(a) - fp(a) * b).abs(), b * b)
            }),
        },
        Estimate {
            name: "derivative-sine",
            statement: "|f'(a+b)-f'(a)| <= C|sin b|",
            reference: 2.0 * d2,
            ratio: Box::new(move |rng| {
                let (a, b) = (angle(rng), angle(rng));
                quotient((fp(a + b) - fp(a)).abs(), b.sin().abs())
            }),
        },
        Estimate {
            name: "interaction-sine",
            statement: "|f(a+b)-f(a)-f(b)| <= C|sin a||sin b|",
            reference: 2.0 * d2,
            ratio: Box::new(move |rng| {
                let (a, b) = (angle(rng), angle(rng));
                quotient((f(a + b) - f(a) - f(b)).abs(), (a.sin() * b.sin()).abs())
            }),
        },
        Estimate {
            name: "multi-derivative-sine",
            statement: "|f'(sum a_j)-sum f'(a_j)| <= C sum_{j!=l}|sin a_j||sin a_l|",
            reference: 2.0 * d2,
            ratio: Box::new(move |rng| {
                let j = rng.gen_range(2..=MAX_TUPLE);
                let a: Vec<f64> = (0..j).map(|_| angle(rng)).collect();
                let lhs = (fp(a.iter().sum()) - a.iter().map(|&x| fp(x)).sum::<f64>()).abs();
                quotient(lhs, pair_sum(&a, |x| x.sin().abs()))
            }),
        },
    ]
}

/// `Σ_{j≠ℓ} w(a_j) w(a_ℓ)` over ordered pairs.
fn pair_sum(a: &[f64], w: impl Fn(f64) -> f64) -> f64 {
    let ws: Vec<f64> = a.iter().map(|&x| w(x)).collect();
    let total: f64 = ws.iter().sum();
    total * total - ws.iter().map(|x| x * x).sum::<f64>()
}

fn nlh_estimates(kind: EquationKind) -> Vec<Estimate> {
    let p = kind.p::<f64>();
    let f = move |v: f64| kind.f(v);
    let fp = move |v: f64| kind.f_prime(v);
    let taylor_rel = move |a: f64, b: f64| (f(a + b) - f(a) - fp(a) * b).abs();
    let deriv = move |a: f64, b: f64| (fp(a + b) - fp(a)).abs();
    let inter = move |a: f64, b: f64| (f(a + b) - f(a) - f(b)).abs();
    let pair = move |a: f64, b: f64| (fp(a + b) - fp(a) - fp(b)).abs();
    let h = (p - 1.0) / 2.0;

    // Each ratio is homogeneous, so its supremum is a supremum over x = b/a with a = 1,
    // or over a with b = 1.
    let c1 = sup_ratio(|x| quotient(taylor_rel(1.0, x), x * x));
    let c2 = sup_ratio(|x| quotient(deriv(1.0, x), x.abs()));
    let c3 = sup_ratio(|x| quotient(deriv(x, 1.0), 1.0));
    let c4 = sup_ratio(|x| quotient(taylor_rel(x, 1.0), 1.0));
    let c5 = sup_ratio(|x| quotient(inter(1.0, x), x.abs().powf(p - 1.0)));
    let c6 = sup_ratio(|x| quotient(pair(1.0, x), 2.0 * x.abs().powf(h)));

    let pq = |rng: &mut ChaCha8Rng| (signed_log_uniform(rng, 3.0), signed_log_uniform(rng, 3.0));
    vec![
        Estimate {
            name: "taylor-weighted",
            statement: "|f(a+b)-f(a)-f'(a)b| <= C|a|^{p-2}|b|^2, a != 0",
            reference: c1,
            ratio: Box::new(move |rng| {
                let (a, b) = pq(rng);
                quotient(taylor_rel(a, b), a.abs().powf(p - 2.0) * b * b)
            }),
        },
        Estimate {
            name: "derivative-weighted",
            statement: "|f'(a+b)-f'(a)| <= C|a|^{p-2}|b|, a != 0",
            reference: c2,
            ratio: Box::new(move |rng| {
                let (a, b) = pq(rng);
                quotient(deriv(a, b), a.abs().powf(p - 2.0) * b.abs())
            }),
        },
        Estimate {
            name: "derivative-holder",
            statement: "|f'(a+b)-f'(a)| <= C|b|^{p-1}",
            reference: c3,
            ratio: Box::new(move |rng| {
                let (a, b) = pq(rng);
                quotient(deriv(a, b), b.abs().powf(p - 1.0))
            }),
        },
        Estimate {
            name: "taylor-power",
            statement: "|f(a+b)-f(a)-f'(a)b| <= C|b|^p",
            reference: c4,
            ratio: Box::new(move |rng| {
                let (a, b) = pq(rng);
                quotient(taylor_rel(a, b), b.abs().powf(p))
            }),
        },
        Estimate {
            name: "interaction",
            statement: "|f(a+b)-f(a)-f(b)| <= C|b|^{p-1}|a|",
            reference: c5,
            ratio: Box::new(move |rng| {
                let (a, b) = pq(rng);
                quotient(inter(a, b), b.abs().powf(p - 1.0) * a.abs())
            }),
        },
        Estimate {
            name: "multi-derivative",
            statement: "|f'(sum a_j)-sum f'(a_j)| <= C sum_{j!=l}|a_j a_l|^{(p-1)/2}",
            reference: c6,
            ratio: Box::new(move |rng| {
                let j = rng.gen_range(2..=MAX_TUPLE);
                let a: Vec<f64> = (0..j).map(|_| signed_log_uniform(rng, 3.0)).collect();
                let lhs = (fp(a.iter().sum()) - a.iter().map(|&x| fp(x)).sum::<f64>()).abs();
                quotient(lhs, pair_sum(&a, |x| x.abs().powf(h)))
            }),
        },
    ]
}

/// Supremum of `ratio(x)` over `x ∈ ℝ \ {0}`.
fn sup_ratio(ratio: impl Fn(f64) -> f64) -> f64 {
    let eval = |sign: f64, tau: f64| ratio(sign * 10f64.powf(tau));
    let mut best = 0.0f64;
    for sign in [1.0, -1.0] {
        let n = 16_001;
        let (lo, hi) = (-8.0, 8.0);
        let step = (hi - lo) / (n - 1) as f64;
        let mut arg = 0;
        let mut local = f64::NEG_INFINITY;
        for i in 0..n {
            let v = eval(sign, lo + step * i as f64);
            if v > local {
                local = v;
                arg = i;
            }
        }
        let centre = lo + step * arg as f64;
        let refined = golden_max(|t| eval(sign, t), centre - step, centre + step);
        best = best.max(local).max(refined);
    }
    for x in [-1.0, -2.0, -0.5] {
        best = best.max(ratio(x));
    }
    best
}

fn golden_max(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..80 {
        if gc > gd {
            b = d;
            d = c;
            gd = gc;
            c = b - phi * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + phi * (b - a);
            gd = g(d);
        }
    }
    gc.max(gd)
}
