//! Property-based invariants over randomly drawn kinds, scales and test fields.

use std::sync::Arc;

use bubbletree::constants::{alpha, kappa_explicit, rates};
use bubbletree::dynamics::{classify_signs, integrate_scales, is_admissible, ode_rhs};
use bubbletree::evolution::{evolve, EvolutionState, SolverConfig};
use bubbletree::fit::{fit_scales, FitContext};
use bubbletree::grid::{gauss_legendre, inner};
use bubbletree::inequalities::check_f_inequalities;
use bubbletree::kernel::{right_inverse, InverseMode, KernelPair};
use bubbletree::profile::BubbleConfig;
use bubbletree::{EquationKind, FieldKind, RadialField, RadialGrid, Stencil};
use proptest::prelude::*;

fn kind_strategy() -> impl Strategy<Value = EquationKind> {
    prop_oneof![
        (3u32..=5).prop_map(|d| EquationKind::hmhf(d).unwrap()),
        (7u32..=10).prop_map(|n| EquationKind::nlh(n).unwrap()),
    ]
}

/// Smooth bump in `ln r` with unit peak.
fn bump(r: f64, center: f64, width: f64) -> f64 {
    let x = (r.ln() - center) / width;
    if x.abs() < 1.0 {
        (-1.0 / (1.0 - x * x)).exp() * std::f64::consts::E
    } else {
        0.0
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gauss_legendre_is_exact_on_cubics(a in 1e-3f64..10.0, len in 1e-3f64..10.0, c in prop::array::uniform4(-5.0f64..5.0)) {
        let b = a + len;
        let poly = |r: f64| c[0] + c[1] * r + c[2] * r * r + c[3] * r * r * r;
        let anti = |r: f64| c[0] * r + c[1] * r * r / 2.0 + c[2] * r.powi(3) / 3.0 + c[3] * r.powi(4) / 4.0;
        let exact = anti(b) - anti(a);
        let scale = [c[0] * len, c[1] * b * b, c[2] * b.powi(3), c[3] * b.powi(4)].iter().map(|x| x.abs()).sum::<f64>();
        prop_assert!((gauss_legendre(a, b, 1, poly) - exact).abs() <= 1e-12 * scale.max(1e-300));
    }

    #[test]
    fn product_weights_are_exact_on_quadratics_in_log_radius(
        k in 0u32..=3,
        log_lo in -3.0f64..0.0,
        decades in 4.0f64..6.0,
        c in prop::array::uniform3(-2.0f64..2.0),
    ) {
        let (lo, hi) = (10f64.powf(log_lo), 10f64.powf(log_lo + decades));
        let grid = RadialGrid::<f64>::log_uniform(lo, hi, 601).unwrap();
        let n = f64::from(k + 1);
        // ∫ (c₀ + c₁s + c₂s²) r^k dr = ∫ (c₀ + c₁s + c₂s²) e^{ns} ds.
        let values: Vec<f64> = grid.nodes().iter().map(|r| { let s = r.ln(); c[0] + c[1] * s + c[2] * s * s }).collect();
        let anti = |s: f64| (n * s).exp() * (c[0] / n + c[1] * (s / n - 1.0 / (n * n)) + c[2] * (s * s / n - 2.0 * s / (n * n) + 2.0 / (n * n * n)));
        let exact = anti(hi.ln()) - anti(lo.ln());
        let got: f64 = grid.weights(n).iter().zip(&values).map(|(w, v)| w * v).sum();
        let scale: f64 = grid.weights(n).iter().zip(&values).map(|(w, v)| (w * v).abs()).sum();
        prop_assert!((got - exact).abs() <= 1e-8 * scale, "{got} vs {exact}");
    }

    #[test]
    fn laplacian_is_symmetric(n in 3u32..=10, c1 in -1.5f64..1.5, c2 in -1.5f64..1.5, w1 in 0.5f64..1.5, w2 in 0.5f64..1.5) {
        let grid = Arc::new(RadialGrid::log_uniform(1e-3, 1e3, 1601).unwrap());
        let f = RadialField::from_fn(grid.clone(), FieldKind::U, |r| bump(r, c1, w1)).unwrap();
        let g = RadialField::from_fn(grid.clone(), FieldKind::U, |r| bump(r, c2, w2)).unwrap();
        let lap = |x: &RadialField<f64>| {
            RadialField::new(grid.clone(), grid.laplacian_values(x.values(), f64::from(n), Stencil::Second), FieldKind::U).unwrap()
        };
        let a = inner(&lap(&f), &g, n).unwrap();
        let b = inner(&f, &lap(&g), n).unwrap();
        let scale = inner(&lap(&f), &lap(&f), n).unwrap().sqrt() * inner(&g, &g, n).unwrap().sqrt();
        prop_assert!((a - b).abs() <= 1e-3 * scale, "{a} vs {b}");
    }

    #[test]
    fn hmhf_generator_is_d_sin_q(d in 3u32..=6, log_y in -4.0f64..4.0) {
        let kind = EquationKind::hmhf(d).unwrap();
        let y = 10f64.powf(log_y);
        prop_assert!((kind.lambda_q(y) - f64::from(d) * kind.ground_v::<f64>(y).sin()).abs() < 1e-12);
    }

    #[test]
    fn u_and_v_fields_correspond(kind in kind_strategy(), c in -2.0f64..2.0) {
        let grid = Arc::new(RadialGrid::log_uniform(1e-2, 1e2, 201).unwrap());
        let d = kind.d::<f64>();
        let u = RadialField::from_fn(grid, FieldKind::U, |r| bump(r, c, 1.0)).unwrap();
        let v = u.to_v(d).unwrap();
        for ((&r, &uu), &vv) in u.grid().nodes().iter().zip(u.values()).zip(v.values()) {
            prop_assert!((vv - r.powf(d) * uu).abs() <= 1e-14 * vv.abs().max(1e-300));
        }
        let back = v.to_u(d).unwrap();
        for (a, b) in back.values().iter().zip(u.values()) {
            prop_assert!((a - b).abs() <= 1e-14 * b.abs().max(1e-300));
        }
    }

    #[test]
    fn wronskian_is_one(kind in kind_strategy(), log_y in -2.0f64..2.0) {
        let pair = KernelPair::<f64>::build(kind).unwrap();
        let samples = pair.sample(&[10f64.powf(log_y)]).unwrap();
        prop_assert!(samples.wronskian_defect(kind.n()) < 1e-6);
    }

    #[test]
    fn rate_family_solves_the_formal_ode(kind in kind_strategy(), bubbles in 2usize..=3, log_t in 0.0f64..4.0, log_l in -1.0f64..1.0) {
        let kappa: f64 = kappa_explicit(kind).unwrap();
        let scale = 10f64.powf(log_l);
        let table = rates(kind, kappa, bubbles, scale).unwrap();
        let t = 10f64.powf(log_t);
        for iotas in classify_signs(kind, bubbles) {
            prop_assert!(is_admissible(kappa, &iotas));
            let lambdas: Vec<f64> = (1..=bubbles).map(|j| table.lambda_ex(j, t).unwrap()).collect();
            let mut rhs = vec![0.0; bubbles];
            ode_rhs(kind, kappa, &iotas, &lambdas, &mut rhs);
            for j in 0..bubbles {
                let exact = -alpha::<f64>(kind, j + 1) * lambdas[j] / t;
                prop_assert!((rhs[j] - exact).abs() <= 1e-10 * lambdas[j] / t, "j = {j}: {} vs {exact}", rhs[j]);
            }
        }
    }

    #[test]
    fn inequality_sampler_finds_no_violation(kind in kind_strategy(), seed in any::<u64>()) {
        let report = check_f_inequalities(kind, 2_000, seed).unwrap();
        prop_assert!(report.passed());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn scale_ode_is_parabolically_covariant(kind in kind_strategy(), log_c in -1.0f64..1.0, ratio in 0.02f64..0.2) {
        let kappa: f64 = kappa_explicit(kind).unwrap();
        let iotas = classify_signs(kind, 2).remove(0);
        let c = 10f64.powf(log_c);
        let base = integrate_scales(kind, kappa, &iotas, &[1.0, ratio], (1.0, 100.0), 10).unwrap();
        let scaled = integrate_scales(kind, kappa, &iotas, &[c, c * ratio], (c * c, 100.0 * c * c), 10).unwrap();
        prop_assert_eq!(base.times.len(), scaled.times.len());
        for (a, b) in base.scales.iter().zip(&scaled.scales) {
            prop_assert!((b[0] / c - 1.0).abs() < 1e-14);
            prop_assert!((b[1] / (c * a[1]) - 1.0).abs() < 1e-7);
        }
        let mus: Vec<f64> = base.scales.iter().map(|s| s[1] / s[0]).collect();
        prop_assert!(mus.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn right_inverse_is_scaling_covariant(kind in kind_strategy(), shift in -40i32..40, center in -1.0f64..1.0) {
        let grid = Arc::new(RadialGrid::log_uniform(1e-4, 1e4, 2001).unwrap());
        let pair = KernelPair::<f64>::build(kind).unwrap();
        let lambda = (f64::from(shift) * grid.h()).exp();
        let d = kind.d::<f64>();
        let f = RadialField::from_fn(grid.clone(), FieldKind::U, |r| bump(r, center, 1.0)).unwrap();
        // F_λ̲ = λ^{-2} λ^{-D} F(r/λ): the data of H_λ u_λ for u_λ = λ^{-D} u(r/λ).
        let f_scaled = RadialField::from_fn(grid.clone(), FieldKind::U, |r| bump(r / lambda, center, 1.0) / (lambda * lambda * lambda.powf(d))).unwrap();
        let base = right_inverse(&f, &pair, 1.0, InverseMode::General).unwrap();
        let scaled = right_inverse(&f_scaled, &pair, lambda, InverseMode::General).unwrap();
        let expected = base.rescale(lambda, d).unwrap();
        let diff = scaled.sub(&expected).unwrap();
        let window = |x: &RadialField<f64>| {
            let v: Vec<f64> = grid.nodes().iter().zip(x.values()).map(|(&r, &y)| if (r / lambda).ln().abs() < 6.0 { y } else { 0.0 }).collect();
            RadialField::new(grid.clone(), v, FieldKind::U).unwrap()
        };
        let (num, den) = (window(&diff), window(&expected));
        let rel = (inner(&num, &num, kind.n()).unwrap() / inner(&den, &den, kind.n()).unwrap()).sqrt();
        prop_assert!(rel < 1e-6, "relative mismatch {rel}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn fit_is_idempotent_and_gauge_covariant(mu in 0.02f64..0.08, shift in -30i32..30) {
        let kind = EquationKind::hmhf(3).unwrap();
        let kappa: f64 = kappa_explicit(kind).unwrap();
        let pair = KernelPair::build(kind).unwrap();
        let ctx = FitContext::new(kind, &pair, kappa).unwrap();
        let grid = Arc::new(RadialGrid::log_uniform(1e-5, 1e4, 2401).unwrap());
        let cfg = BubbleConfig::new(vec![1, 1], vec![1.0, mu]).unwrap();
        let u = ctx.profile(&grid, &cfg).unwrap().u;
        let first = fit_scales(&ctx, &u, &[1, 1], &[1.02, mu * 0.98]).unwrap();
        let rebuilt = ctx.profile(&grid, &first.config().unwrap()).unwrap().u;
        let second = fit_scales(&ctx, &rebuilt, &[1, 1], &first.lambdas).unwrap();
        for j in 0..2 {
            prop_assert!((second.lambdas[j] / first.lambdas[j] - 1.0).abs() < 1e-10);
        }
        let c = (f64::from(shift) * grid.h()).exp();
        let moved = u.rescale(c, kind.d()).unwrap();
        let gauge = fit_scales(&ctx, &moved, &[1, 1], &[c, c * mu]).unwrap();
        for j in 0..2 {
            prop_assert!((gauge.lambdas[j] / (c * first.lambdas[j]) - 1.0).abs() < 1e-8, "{:?}", gauge.lambdas);
        }
    }

    #[test]
    fn energy_never_increases(kind in kind_strategy(), amp in -0.02f64..0.02, center in -1.0f64..1.0) {
        let grid = Arc::new(RadialGrid::log_uniform(1e-4, 1e4, 801).unwrap());
        let u = RadialField::from_fn(grid.clone(), FieldKind::U, |r| {
            kind.ground_u(r) * (1.0 + amp * bump(r, center, 1.0))
        }).unwrap();
        let initial = EvolutionState::from_u(kind, 0.0, &u).unwrap();
        let run = evolve(kind, &initial, &SolverConfig::adaptive(0.5, 1e-3)).unwrap();
        for w in run.history.windows(2) {
            prop_assert!(w[1].energy <= w[0].energy + 1e-4 * w[0].energy.abs(), "{} -> {}", w[0].energy, w[1].energy);
        }
    }
}
