//! One function per subcommand. Each validates its arguments, computes, and fills a [`RunOutput`].

use std::path::{Path, PathBuf};
use std::sync::Arc;

use bubbletree::constants::{kappa_explicit, kappa_grid, kappa_unified, rates};
use bubbletree::dynamics::{fit_power_law, integrate_scales, is_admissible};
use bubbletree::evolution::{energy_audit, evolve, EvolutionState, SolverConfig};
use bubbletree::fit::{fit_scales, FitContext, FitResult};
use bubbletree::grid::inner;
use bubbletree::kernel::{apply_h, right_inverse, InverseMode, KernelPair};
use bubbletree::profile::{
    build_profile, envelope_constants, profile_diagnostics, smallest_a0, BubbleConfig, ProfileSettings,
};
use bubbletree::{EquationKind, FieldKind, RadialField, RadialGrid, Stencil};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::args::{
    check_scales, require, ConstantsArgs, EvolveArgs, FitArgs, KernelArgs, OdeArgs, ProfileArgs, ReportArgs,
};
use crate::error::{usage, CliError, CliResult};
use crate::output::{format_number, read_table, RunOutput, METADATA_FILE};

fn field_unit(kind: EquationKind) -> &'static str {
    if kind.is_hmhf() {
        "u [rad]"
    } else {
        "u [length^-D]"
    }
}

/// Smooth bump in `ln r` with unit peak, supported on `|ln r − center| < width`.
pub fn log_bump(r: f64, center: f64, width: f64) -> f64 {
    let x = (r.ln() - center) / width;
    if x.abs() < 1.0 {
        (-1.0 / (1.0 - x * x)).exp() * std::f64::consts::E
    } else {
        0.0
    }
}

fn kind_meta(out: &mut RunOutput, kind: EquationKind) {
    out.meta("kind", kind.to_string());
    out.meta("D", kind.d::<f64>());
    out.meta("N", kind.n());
}

pub fn constants(args: &ConstantsArgs, out: &mut RunOutput) -> CliResult<()> {
    let kind = args.kind.resolve()?;
    require(args.bubbles >= 1, "--J must be at least 1")?;
    require(args.scale.is_finite() && args.scale > 0.0, "--L must be positive")?;
    let explicit: f64 = kappa_explicit(kind)?;
    let unified = kappa_unified(kind, &kappa_grid::<f64>()?)?;
    let gap = (unified / explicit - 1.0).abs();
    let table = rates(kind, explicit, args.bubbles, args.scale)?;
    let rows: Vec<Vec<f64>> = (1..=args.bubbles)
        .map(|j| vec![j as f64, table.alphas[j - 1], table.betas[j - 1], table.prefactor(j)])
        .collect();
    out.table("rates.csv", &["j [1]", "alpha [1]", "beta [1]", "prefactor [length^(1+2alpha)]"], &rows)?;
    kind_meta(out, kind);
    out.meta("J", args.bubbles);
    out.meta("L", args.scale);
    out.meta("kappa_explicit", explicit);
    out.meta("kappa_unified", unified);
    out.meta("kappa_relative_gap", gap);
    out.line(format!("{kind}: κ = {explicit:.9e} (explicit), {unified:.9e} (unified)"));
    for row in &rows {
        out.line(format!("  j = {}: α = {}, β = {:.6}", row[0], format_number(row[1]), row[2]));
    }
    out.check("kappa consistency", gap < 1e-6, format!("relative gap {gap:.2e}"));
    Ok(())
}

pub fn kernel(args: &KernelArgs, out: &mut RunOutput) -> CliResult<()> {
    let kind = args.kind.resolve()?;
    require(args.samples >= 2, "--samples must be at least 2")?;
    require(args.y_min > 0.0 && args.y_max > args.y_min, "need 0 < --y-min < --y-max")?;
    require(args.nodes >= 101, "--nodes must be at least 101")?;
    let pair = KernelPair::<f64>::build(kind)?;
    let (lo, hi) = (args.y_min.ln(), args.y_max.ln());
    let mut ys: Vec<f64> =
        (0..args.samples).map(|i| (lo + (hi - lo) * i as f64 / (args.samples - 1) as f64).exp()).collect();
    if let Some(y_star) = kind.lambda_w_zero::<f64>().filter(|y| *y > args.y_min && *y < args.y_max) {
        ys.extend([y_star * (1.0 - 1e-6), y_star, y_star * (1.0 + 1e-6)]);
        ys.sort_by(f64::total_cmp);
    }
    let samples = pair.sample(&ys)?;
    let nm1 = kind.n() as f64 - 1.0;
    let rows: Vec<Vec<f64>> = (0..ys.len())
        .map(|i| {
            let w = ys[i].powf(nm1) * (samples.g1[i] * samples.dg2[i] - samples.g2[i] * samples.dg1[i]);
            vec![ys[i], samples.g1[i], samples.g2[i], w - 1.0]
        })
        .collect();
    out.table("kernel.csv", &["y [1]", "gamma1 [1]", "gamma2 [1]", "wronskian_defect [1]"], &rows)?;
    let defect = samples.wronskian_defect(kind.n());

    let grid = Arc::new(RadialGrid::log_uniform(args.y_min, args.y_max, args.nodes)?);
    let lw = RadialField::from_fn(grid.clone(), FieldKind::U, |r| kind.lambda_w(r))?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut residuals = Vec::with_capacity(args.trials);
    for trial in 0..args.trials {
        let (center, width) = (rng.gen_range(lo / 2.0..hi / 2.0), rng.gen_range(0.3..1.5));
        let (a, b) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let f = RadialField::from_fn(grid.clone(), FieldKind::U, |r: f64| {
            let x = r.ln() - center;
            log_bump(r, center, width) * (1.0 + a * x + b * x * x)
        })?;
        let carrier = RadialField::from_fn(grid.clone(), FieldKind::U, |r| log_bump(r, center, width))?;
        let shift = inner(&f, &lw, kind.n())? / inner(&carrier, &lw, kind.n())?;
        let f_orth = f.sub(&carrier.scaled(shift))?;
        let mut row = vec![trial as f64];
        for (mode, rhs) in [(InverseMode::General, &f), (InverseMode::Orthogonal, &f_orth)] {
            let u = right_inverse(rhs, &pair, 1.0, mode)?;
            let res = apply_h(&u, kind, 1.0, Stencil::Fourth)?.sub(rhs)?;
            row.push((inner(&res, &res, kind.n())? / inner(rhs, rhs, kind.n())?).sqrt());
        }
        residuals.push(row);
    }
    out.table("inverse.csv", &["trial [1]", "general_residual [1]", "orthogonal_residual [1]"], &residuals)?;
    let worst = |k: usize| residuals.iter().map(|r| r[k]).fold(0.0, f64::max);
    let (general, orthogonal) = (worst(1), worst(2));
    kind_meta(out, kind);
    out.meta("seed", args.seed);
    out.meta("wronskian_defect_max", defect);
    out.meta("inverse_general_max", general);
    out.meta("inverse_orthogonal_max", orthogonal);
    out.line(format!("{kind}: max |W − 1| = {defect:.2e} on [{}, {}]", args.y_min, args.y_max));
    out.line(format!("  right inverse residual: general {general:.2e}, orthogonal {orthogonal:.2e}"));
    out.check("wronskian", defect < 1e-6, format!("{defect:.2e}"));
    out.check("right inverse", general.max(orthogonal) < 1e-6, format!("{general:.2e}/{orthogonal:.2e}"));
    Ok(())
}

/// `A₀` at which the envelope ratios are recorded, and the NLH two-sided constant.
const ENVELOPE_A0: f64 = 10.0;
const ENVELOPE_CONSTANT: f64 = 2.0;

pub fn profile(args: &ProfileArgs, out: &mut RunOutput) -> CliResult<()> {
    let kind = args.kind.resolve()?;
    require(args.density.is_finite() && args.density >= 10.0, "--density must be at least 10")?;
    let kappa: f64 = kappa_explicit(kind)?;
    let pair = KernelPair::build(kind)?;
    let settings = ProfileSettings::default();
    kind_meta(out, kind);
    out.meta("signs", args.signs.iter().map(|&s| i64::from(s)).collect::<Vec<_>>());
    out.meta("density", args.density);
    if let Some(sweep) = &args.mu_sweep {
        require(args.signs.len() == 2, "--mu-sweep needs exactly two signs")?;
        require(!sweep.is_empty() && sweep.iter().all(|m| *m > 0.0 && *m < 1.0), "sweep ratios must lie in (0, 1)")?;
        let rows = sweep
            .par_iter()
            .map(|&mu| {
                let grid = Arc::new(RadialGrid::with_density(mu * 1e-3, 1e3, args.density)?);
                let cfg = BubbleConfig::new(args.signs.clone(), vec![1.0, mu])?;
                let built = build_profile(kind, &grid, &pair, kappa, &cfg, &settings)?;
                let report = profile_diagnostics(&built, kappa)?;
                Ok(vec![mu, report.d_quantity, report.psi_l2, report.psi_ratio, report.frkr_defects[0]])
            })
            .collect::<CliResult<Vec<_>>>()?;
        out.table(
            "sweep.csv",
            &["mu [1]", "interaction [length^-2]", "psi_l2 [length^-2]", "psi_ratio [1]", "lagrange_defect [1]"],
            &rows,
        )?;
        let ratios: Vec<f64> = rows.iter().map(|r| r[3]).collect();
        let consts: Vec<f64> = rows.iter().map(|r| r[4]).collect();
        let spread = consts.iter().cloned().fold(0.0, f64::max) / consts.iter().cloned().fold(f64::INFINITY, f64::min);
        out.meta("mu_sweep", sweep.clone());
        out.meta("psi_ratios", ratios.clone());
        out.meta("lagrange_constants", consts.clone());
        for r in &rows {
            out.line(format!("μ = {}: ‖Ψ‖/√𝒟 = {:.4e}, Lagrange constant {:.4}", r[0], r[3], r[4]));
        }
        out.check(
            "residual ratio decreasing",
            ratios.windows(2).all(|w| w[1] < w[0]),
            ratios.iter().map(|x| format!("{x:.4e}")).collect::<Vec<_>>().join(", "),
        );
        out.check("lagrange constant stable", spread <= 2.0, format!("max/min {spread:.2}"));
        return Ok(());
    }
    check_scales(&args.signs, &args.lambdas)?;
    let inner_scale = *args.lambdas.last().unwrap_or(&1.0);
    let grid = Arc::new(RadialGrid::with_density(inner_scale * 1e-3, args.lambdas[0] * 1e3, args.density)?);
    let cfg = BubbleConfig::new(args.signs.clone(), args.lambdas.clone())?;
    let built = build_profile(kind, &grid, &pair, kappa, &cfg, &settings)?;
    let report = profile_diagnostics(&built, kappa)?;
    let rows: Vec<Vec<f64>> = (0..grid.len())
        .map(|i| vec![grid.nodes()[i], built.u.values()[i], built.u_tilde.values()[i], built.psi.values()[i]])
        .collect();
    let unit = field_unit(kind);
    out.table("profile.csv", &["r [length]", unit, "corrector [same as u]", "psi [u/length^2]"], &rows)?;
    let levels: Vec<Value> = built
        .correctors
        .iter()
        .zip(&report.frkr_defects)
        .map(|(c, defect)| json!({ "level": c.level, "lagrange": c.frkr, "iterations": c.iterations, "lagrange_defect": defect }))
        .collect();
    out.meta("lambdas", args.lambdas.clone());
    out.meta("interaction", report.d_quantity);
    out.meta("psi_l2", report.psi_l2);
    out.meta("psi_ratio", report.psi_ratio);
    out.meta("correctors", levels);
    let envelope = envelope_constants(&built, ENVELOPE_A0);
    let ranges: Vec<Value> =
        envelope.ratios.iter().map(|r| r.map_or(Value::Null, |(lo, hi)| json!([lo, hi]))).collect();
    out.meta("envelope_a0", ENVELOPE_A0);
    out.meta("envelope_ratios", ranges);
    out.line(format!("{kind}: {} bubbles, 𝒟 = {:.4e}, ‖Ψ‖ = {:.4e}", cfg.len(), report.d_quantity, report.psi_l2));
    for c in &built.correctors {
        out.line(format!("  level {}: 𝔯 = {:.6e} after {} iterations", c.level, c.frkr, c.iterations));
    }
    if let EquationKind::Nlh { .. } = kind {
        let a0 = smallest_a0(&built, ENVELOPE_CONSTANT)?;
        out.meta("smallest_a0", a0.map_or(Value::Null, Value::from));
        out.line(match a0 {
            Some(a0) => format!("smallest A₀ with |U|/|W_j| in [1/{ENVELOPE_CONSTANT}, {ENVELOPE_CONSTANT}]: {a0:.2}"),
            None => "no A₀ keeps every annulus nonempty and within the envelope".into(),
        });
    }
    Ok(())
}

pub fn ode(args: &OdeArgs, out: &mut RunOutput) -> CliResult<()> {
    let kind = args.kind.resolve()?;
    require(args.bubbles >= 1, "--J must be at least 1")?;
    require(
        args.signs.len() == args.bubbles,
        format!("--signs has {} entries for J = {}", args.signs.len(), args.bubbles),
    )?;
    require(args.ratio > 0.0 && args.ratio < 1.0, "--ratio must lie in (0, 1)")?;
    require(args.scale.is_finite() && args.scale > 0.0, "--L must be positive")?;
    require(args.per_decade >= 1, "--per-decade must be positive")?;
    let kappa: f64 = kappa_explicit(kind)?;
    let initial: Vec<f64> = (0..args.bubbles).map(|j| args.scale * args.ratio.powi(j as i32)).collect();
    let traj = integrate_scales(kind, kappa, &args.signs, &initial, args.t_span, args.per_decade)?;
    let table = rates(kind, kappa, args.bubbles, args.scale)?;
    let mut header = vec!["t [time]".to_string()];
    header.extend((1..=args.bubbles).map(|j| format!("lambda_{j} [length]")));
    let rows: Vec<Vec<f64>> = traj
        .times
        .iter()
        .zip(&traj.scales)
        .map(|(t, s)| std::iter::once(*t).chain(s.iter().copied()).collect())
        .collect();
    out.table("trajectory.csv", &header.iter().map(String::as_str).collect::<Vec<_>>(), &rows)?;
    let admissible = is_admissible(kappa, &args.signs);
    kind_meta(out, kind);
    out.meta("J", args.bubbles);
    out.meta("signs", args.signs.iter().map(|&s| i64::from(s)).collect::<Vec<_>>());
    out.meta("t_span", vec![args.t_span.0, args.t_span.1]);
    out.meta("L", args.scale);
    out.meta("kappa", kappa);
    out.meta("admissible", admissible);
    out.meta("collision_time", traj.collision.map_or(Value::Null, Value::from));
    out.line(format!("{kind} signs {:?}: admissible {admissible}", args.signs));
    if let Some(t) = traj.collision {
        out.line(format!("  scales collide at t = {t:.4e}"));
        out.check("collision matches admissibility", !admissible, format!("collision at t = {t:.4e}"));
        return Ok(());
    }
    let devs = traj.deviations(&table);
    let fits: Vec<Value> = traj
        .fitted
        .iter()
        .enumerate()
        .map(|(i, f)| {
            json!({ "j": i + 1, "exponent": f.exponent, "prefactor": f.prefactor,
                    "alpha": table.alphas[i], "target_prefactor": table.prefactor(i + 1) })
        })
        .collect();
    out.meta("fits", fits);
    for (i, f) in traj.fitted.iter().enumerate() {
        out.line(format!(
            "  λ_{}: exponent {:.5} (α = {}), prefactor {:.5e} (target {:.5e})",
            i + 1,
            f.exponent,
            format_number(table.alphas[i]),
            f.prefactor,
            table.prefactor(i + 1)
        ));
    }
    let (exp_dev, pref_dev) = devs.iter().skip(1).fold((0.0f64, 0.0f64), |a, d| (a.0.max(d.0), a.1.max(d.1)));
    out.check("collision matches admissibility", admissible, "no collision".to_string());
    out.check("exponents within 2%", exp_dev < 0.02, format!("{:.3}%", 100.0 * exp_dev));
    out.check("prefactors within 5%", pref_dev < 0.05, format!("{:.3}%", 100.0 * pref_dev));
    Ok(())
}

pub fn evolve_run(args: &EvolveArgs, out: &mut RunOutput) -> CliResult<()> {
    let kind = args.kind.resolve()?;
    check_scales(&args.signs, &args.lambdas)?;
    require(args.perturbation.is_finite(), "--perturbation must be finite")?;
    require(args.t_end > 0.0 && args.tol > 0.0, "--t-end and --tol must be positive")?;
    require(args.nodes >= 101, "--nodes must be at least 101")?;
    require(args.r_min > 0.0 && args.r_max > args.r_min, "need 0 < --r-min < --r-max")?;
    require(args.snapshot_from > 0.0 && args.snapshot_from < args.t_end, "need 0 < --snapshot-from < --t-end")?;
    let kappa: f64 = kappa_explicit(kind)?;
    let pair = KernelPair::build(kind)?;
    let ctx = FitContext::new(kind, &pair, kappa)?;
    let grid = Arc::new(RadialGrid::log_uniform(args.r_min, args.r_max, args.nodes)?);
    let cfg = BubbleConfig::new(args.signs.clone(), args.lambdas.clone())?;
    let u = ctx.profile(&grid, &cfg)?.u;
    let d = kind.d::<f64>();
    let values: Vec<f64> = u
        .values()
        .iter()
        .zip(grid.nodes())
        .map(|(&x, &r)| x + args.perturbation * log_bump(r, 0.3f64.ln(), 1.0) / r.powf(d))
        .collect();
    let initial = EvolutionState::from_u(kind, 0.0, &RadialField::new(grid.clone(), values, FieldKind::U)?)?;
    let solver = SolverConfig::adaptive(args.t_end, args.tol).with_log_snapshots(args.snapshot_from, args.per_decade);
    let run = evolve(kind, &initial, &solver)?;
    let audit = energy_audit(&run.history)?;

    let history: Vec<Vec<f64>> =
        run.history.iter().map(|h| vec![h.t, h.energy, h.velocity_sq, h.step_dissipation]).collect();
    out.table(
        "history.csv",
        &["t [time]", "energy [energy]", "velocity_sq [energy/time]", "step_dissipation [energy]"],
        &history,
    )?;
    let last = run.final_state().u(kind)?;
    let state: Vec<Vec<f64>> = grid.nodes().iter().zip(last.values()).map(|(&r, &x)| vec![r, x]).collect();
    out.table("final_state.csv", &["r [length]", field_unit(kind)], &state)?;

    kind_meta(out, kind);
    out.meta("signs", args.signs.iter().map(|&s| i64::from(s)).collect::<Vec<_>>());
    out.meta("lambdas", args.lambdas.clone());
    out.meta("perturbation", args.perturbation);
    out.meta("t_end", args.t_end);
    out.meta("tol", args.tol);
    out.meta("nodes", args.nodes);
    out.meta("r_range", vec![args.r_min, args.r_max]);
    out.meta("steps", run.steps);
    out.meta("rejected_steps", run.rejected);
    out.meta("energy_drop", audit.energy_drop);
    out.meta("dissipation", audit.dissipation);
    out.meta("energy_discrepancy", audit.discrepancy);
    out.meta("energy_max_increase", audit.max_increase);
    out.line(format!("{kind}: evolved to t = {} in {} steps ({} rejected)", args.t_end, run.steps, run.rejected));
    out.line(format!("  ΔE = {:.6e}, ∫‖u_t‖² = {:.6e}", audit.energy_drop, audit.dissipation));
    out.check("energy identity", audit.discrepancy < 0.01, format!("relative discrepancy {:.2e}", audit.discrepancy));
    out.check("energy nonincreasing", audit.monotone(), format!("max relative increase {:.2e}", audit.max_increase));

    if !args.fit {
        let rows: Vec<Vec<f64>> = run.snapshots.iter().map(|s| vec![s.state.t, s.energy]).collect();
        out.table("snapshots.csv", &["t [time]", "energy [energy]"], &rows)?;
        return Ok(());
    }
    let mut guess = args.lambdas.clone();
    let mut fitted: Vec<(f64, FitResult<f64>)> = Vec::new();
    let mut lost_at = None;
    for snap in &run.snapshots {
        match fit_scales(&ctx, &snap.state.u(kind)?, &args.signs, &guess) {
            Ok(fit) => {
                guess = fit.lambdas.clone();
                fitted.push((snap.state.t, fit));
            }
            Err(_) => {
                lost_at = Some(snap.state.t);
                break;
            }
        }
    }
    let jn = args.signs.len();
    let mut header = vec!["t [time]".to_string()];
    header.extend((1..=jn).map(|j| format!("lambda_{j} [length]")));
    header.extend(["g_h1 [1]", "g_h2 [length^-1]", "interaction [length^-2]"].map(String::from));
    let rows: Vec<Vec<f64>> = fitted
        .iter()
        .map(|(t, f)| {
            let mut row = vec![*t];
            row.extend(&f.lambdas);
            row.extend([f.g_norms.h1dot, f.g_norms.h2dot, f.d_quantity]);
            row
        })
        .collect();
    out.table("snapshots.csv", &header.iter().map(String::as_str).collect::<Vec<_>>(), &rows)?;
    out.meta("fit_lost_at", lost_at.map_or(Value::Null, Value::from));
    let times: Vec<f64> = fitted.iter().map(|(t, _)| *t).collect();
    let t_from = args.t_end / 10.0;
    let table = rates(kind, kappa, jn, args.lambdas[0])?;
    let mut fits = Vec::new();
    for j in 1..=jn {
        let series: Vec<f64> = fitted.iter().map(|(_, f)| f.lambdas[j - 1]).collect();
        if let Ok(law) = fit_power_law(&times, &series, t_from) {
            fits.push(json!({ "j": j, "exponent": law.exponent, "prefactor": law.prefactor,
                              "alpha": table.alphas[j - 1], "target_prefactor": table.prefactor(j) }));
            out.line(format!(
                "  λ_{j} on the final decade: exponent {:.4} (α = {})",
                law.exponent,
                format_number(table.alphas[j - 1])
            ));
            if j == jn && jn > 1 {
                let dev = (law.exponent / table.alphas[j - 1] - 1.0).abs();
                out.check(
                    "innermost exponent within 10%",
                    lost_at.is_none() && dev < 0.1,
                    format!("{:.2}%", 100.0 * dev),
                );
            }
        }
    }
    out.meta("fits", fits);
    if let (Some(first), Some(last)) = (fitted.iter().find(|(t, _)| *t >= t_from), fitted.last()) {
        let drift = (last.1.lambdas[0] / first.1.lambdas[0] - 1.0).abs();
        out.meta("lambda_1_drift", drift);
        out.check("outer scale drift below 5%", drift < 0.05, format!("{:.3}%", 100.0 * drift));
    }
    if let Some(t) = lost_at {
        out.line(format!("  decomposition lost at t = {t:.4e}"));
    }
    Ok(())
}

/// Rebuilds a log-uniform grid from its node list.
fn grid_from_nodes(nodes: &[f64]) -> CliResult<Arc<RadialGrid<f64>>> {
    require(nodes.len() >= 5, "input needs at least five rows")?;
    let grid = RadialGrid::log_uniform(nodes[0], nodes[nodes.len() - 1], nodes.len())?;
    let worst = grid.nodes().iter().zip(nodes).map(|(a, b)| (a / b - 1.0).abs()).fold(0.0, f64::max);
    require(worst < 1e-9, format!("r column is not log-uniform (relative deviation {worst:.1e})"))?;
    Ok(Arc::new(grid))
}

fn column(header: &[String], name: &str, path: &Path) -> CliResult<usize> {
    header
        .iter()
        .position(|h| h.split_whitespace().next() == Some(name))
        .ok_or_else(|| usage(format!("{}: no column named {name:?}", path.display())))
}

pub fn fit(args: &FitArgs, out: &mut RunOutput) -> CliResult<()> {
    let kind = args.kind.resolve()?;
    check_scales(&args.signs, &args.guess)?;
    let (header, rows) = read_table(&args.input)?;
    let (ir, iu) = (column(&header, "r", &args.input)?, column(&header, "u", &args.input)?);
    let nodes: Vec<f64> = rows.iter().map(|r| r[ir]).collect();
    let grid = grid_from_nodes(&nodes)?;
    let u = RadialField::new(grid.clone(), rows.iter().map(|r| r[iu]).collect(), FieldKind::U)?;
    let kappa: f64 = kappa_explicit(kind)?;
    let pair = KernelPair::build(kind)?;
    let ctx = FitContext::new(kind, &pair, kappa)?;
    let result = fit_scales(&ctx, &u, &args.signs, &args.guess)?;
    let remainder: Vec<Vec<f64>> = grid.nodes().iter().zip(result.g.values()).map(|(&r, &g)| vec![r, g]).collect();
    out.table("remainder.csv", &["r [length]", "g [same as u]"], &remainder)?;
    let orth = result.relative_orthogonality();
    kind_meta(out, kind);
    out.meta("input", args.input.display().to_string());
    out.meta("signs", args.signs.iter().map(|&s| i64::from(s)).collect::<Vec<_>>());
    out.meta("lambdas", result.lambdas.clone());
    out.meta("g_h1", result.g_norms.h1dot);
    out.meta("g_h2", result.g_norms.h2dot);
    out.meta("interaction", result.d_quantity);
    out.meta("newton_iterations", result.newton_iters);
    out.meta("relative_orthogonality", orth);
    let shown: Vec<String> = result.lambdas.iter().map(|l| format!("{l:.8e}")).collect();
    out.line(format!("{kind}: λ = [{}] after {} Newton steps", shown.join(", "), result.newton_iters));
    out.line(format!("  ‖g‖_Ḣ¹ = {:.3e}, ‖g‖_Ḣ² = {:.3e}", result.g_norms.h1dot, result.g_norms.h2dot));
    // A remainder at round-off level makes the relative residual meaningless.
    let exact = result.g_norms.h1dot < 1e-9;
    out.check("orthogonality", exact || orth < 1e-8, format!("relative residual {orth:.2e}"));
    Ok(())
}

/// Every directory directly under `root` that holds a metadata file.
fn discover_runs(root: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = std::fs::read_dir(root).map_err(|e| CliError::io(root, e))?;
    let mut runs: Vec<PathBuf> =
        entries.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.join(METADATA_FILE).is_file()).collect();
    runs.sort();
    Ok(runs)
}

pub fn report(args: &ReportArgs, root: &Path, out: &mut RunOutput) -> CliResult<()> {
    let runs = if args.runs.is_empty() { discover_runs(root)? } else { args.runs.clone() };
    let mut rows = Vec::new();
    let mut names = Vec::new();
    for dir in &runs {
        let path = dir.join(METADATA_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        let meta: Value = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let Some(fits) = meta.get("fits").and_then(Value::as_array) else { continue };
        let name = dir.file_name().map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned());
        for fit in fits {
            let get = |k: &str| fit.get(k).and_then(Value::as_f64).unwrap_or(f64::NAN);
            let (alpha, exponent) = (get("alpha"), get("exponent"));
            let (target, prefactor) = (get("target_prefactor"), get("prefactor"));
            let exp_dev = if alpha == 0.0 { exponent.abs() } else { (exponent / alpha - 1.0).abs() };
            rows.push(vec![
                names.len() as f64,
                get("j"),
                exponent,
                alpha,
                exp_dev,
                prefactor,
                target,
                (prefactor / target - 1.0).abs(),
            ]);
            out.line(format!(
                "{name:<24} {:<14} j={} exponent {exponent:>9.5} α {alpha:>4} ({:>6.2}%)  prefactor {prefactor:.4e} target {target:.4e}",
                meta.get("kind").and_then(Value::as_str).unwrap_or("?"),
                get("j"),
                100.0 * exp_dev
            ));
        }
        names.push(name);
    }
    require(!rows.is_empty(), "no runs with rate fits found; run `ode` or `evolve --fit` first")?;
    out.table(
        "rates.csv",
        &[
            "run [index]",
            "j [1]",
            "exponent [1]",
            "alpha [1]",
            "exponent_rel_dev [1]",
            "prefactor [length^(1+2alpha)]",
            "target_prefactor [length^(1+2alpha)]",
            "prefactor_rel_dev [1]",
        ],
        &rows,
    )?;
    out.meta("runs", names);
    Ok(())
}
