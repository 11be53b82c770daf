//! Command-line configuration. Every numeric flag is checked before any computation starts.

use std::path::PathBuf;

use bubbletree::EquationKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{usage, CliResult};

pub const OUT_ENV: &str = "BUBBLETREE_OUT";

#[derive(Debug, Parser)]
#[command(name = "bubbletree", version, about = "Bubble-tree dynamics of energy-critical radial heat flows")]
pub struct Cli {
    /// Root directory for run artifacts.
    #[arg(long, global = true, env = OUT_ENV, default_value = "bubbletree-out")]
    pub out: PathBuf,
    /// Run directory name under the output root; defaults to the subcommand name.
    #[arg(long, global = true)]
    pub label: Option<String>,
    /// Exit with status 1 when any diagnostic gate fails.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Worker threads for sweeps.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..=256))]
    pub workers: u16,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// κ by both routes, exponents α_j and prefactors β_j.
    Constants(ConstantsArgs),
    /// Wronskian of the kernel pair and right-inverse residuals.
    Kernel(KernelArgs),
    /// Modified multi-bubble profile, optionally swept over the scale ratio.
    Profile(ProfileArgs),
    /// Reduced modulation ODE for the scales with power-law fits.
    Ode(OdeArgs),
    /// Full PDE evolution from a perturbed multi-bubble profile.
    Evolve(EvolveArgs),
    /// Scale decomposition of a radial profile stored as `r,u` columns.
    Fit(FitArgs),
    /// Rate table aggregated from earlier `ode` and `evolve` runs.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindName {
    Hmhf,
    Nlh,
}

#[derive(Debug, Clone, Args)]
pub struct KindArgs {
    /// Harmonic map heat flow or critical nonlinear heat equation.
    #[arg(long, value_enum)]
    pub kind: KindName,
    /// Equivariance index (HMHF).
    #[arg(long = "D")]
    pub equivariance: Option<u32>,
    /// Space dimension (NLH).
    #[arg(long = "N")]
    pub dimension: Option<u32>,
}

impl KindArgs {
    pub fn resolve(&self) -> CliResult<EquationKind> {
        let kind = match (self.kind, self.equivariance, self.dimension) {
            (KindName::Hmhf, Some(d), None) => EquationKind::hmhf(d),
            (KindName::Nlh, None, Some(n)) => EquationKind::nlh(n),
            (KindName::Hmhf, _, _) => return Err(usage("--kind hmhf takes --D and no --N")),
            (KindName::Nlh, _, _) => return Err(usage("--kind nlh takes --N and no --D")),
        };
        kind.map_err(|e| usage(e.to_string()))
    }
}

#[derive(Debug, Args)]
pub struct ConstantsArgs {
    #[command(flatten)]
    pub kind: KindArgs,
    /// Number of bubbles in the rate table.
    #[arg(long = "J", default_value_t = 4)]
    pub bubbles: usize,
    /// Outer scale L.
    #[arg(long = "L", default_value_t = 1.0)]
    pub scale: f64,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    #[command(flatten)]
    pub kind: KindArgs,
    /// Sample points for the Wronskian, log-spaced on the y-range.
    #[arg(long, default_value_t = 2001)]
    pub samples: usize,
    #[arg(long, default_value_t = 1e-2)]
    pub y_min: f64,
    #[arg(long, default_value_t = 1e2)]
    pub y_max: f64,
    /// Random right-hand sides for the inverse check.
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    /// Grid nodes on the y-range for the inverse check.
    #[arg(long, default_value_t = 6001)]
    pub nodes: usize,
    #[arg(long, default_value_t = 3)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[command(flatten)]
    pub kind: KindArgs,
    /// Bubble signs from outer to inner, e.g. `++` or `+-`.
    #[arg(long, value_parser = parse_signs, allow_hyphen_values = true)]
    pub signs: ::std::vec::Vec<i8>,
    /// Scales from outer to inner, comma separated.
    #[arg(long, value_parser = parse_list, default_value = "1,0.1")]
    pub lambdas: ::std::vec::Vec<f64>,
    /// Scale ratios μ₂ for a two-bubble sweep; replaces `--lambdas`.
    #[arg(long, value_parser = parse_list)]
    pub mu_sweep: Option<::std::vec::Vec<f64>>,
    /// Grid nodes per unit of ln r.
    #[arg(long, default_value_t = 400.0 / std::f64::consts::LN_10)]
    pub density: f64,
}

#[derive(Debug, Args)]
pub struct OdeArgs {
    #[command(flatten)]
    pub kind: KindArgs,
    /// Number of bubbles.
    #[arg(long = "J")]
    pub bubbles: usize,
    /// Bubble signs from outer to inner, e.g. `++` or `+-`.
    #[arg(long, value_parser = parse_signs, allow_hyphen_values = true)]
    pub signs: ::std::vec::Vec<i8>,
    /// Time span `t0:t1`.
    #[arg(long, value_parser = parse_span, default_value = "1:1e4")]
    pub t_span: (f64, f64),
    /// Outer scale L.
    #[arg(long = "L", default_value_t = 1.0)]
    pub scale: f64,
    /// Initial scales are `L ρ^{j-1}`.
    #[arg(long, default_value_t = 0.05)]
    pub ratio: f64,
    /// Output samples per decade of t.
    #[arg(long, default_value_t = 40)]
    pub per_decade: usize,
}

#[derive(Debug, Args)]
pub struct EvolveArgs {
    #[command(flatten)]
    pub kind: KindArgs,
    /// Bubble signs from outer to inner, e.g. `++` or `+-`.
    #[arg(long, value_parser = parse_signs, allow_hyphen_values = true)]
    pub signs: ::std::vec::Vec<i8>,
    /// Initial scales from outer to inner, comma separated.
    #[arg(long, value_parser = parse_list, default_value = "1,0.1")]
    pub lambdas: ::std::vec::Vec<f64>,
    /// Amplitude of the smooth bump added to `r^D u` around r = 0.3.
    #[arg(long, default_value_t = 1e-3)]
    pub perturbation: f64,
    /// Final time.
    #[arg(long, default_value_t = 200.0)]
    pub t_end: f64,
    /// Relative change per step allowed by the step-size controller.
    #[arg(long, default_value_t = 2e-5)]
    pub tol: f64,
    /// Log-uniform grid nodes on `[r_min, r_max]`.
    #[arg(long, default_value_t = 4000)]
    pub nodes: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub r_min: f64,
    #[arg(long, default_value_t = 1e4)]
    pub r_max: f64,
    /// First snapshot time; snapshots are log-spaced from there.
    #[arg(long, default_value_t = 1e-2)]
    pub snapshot_from: f64,
    /// Snapshots per decade of t.
    #[arg(long, default_value_t = 10)]
    pub per_decade: usize,
    /// Fit every snapshot with the bubble decomposition.
    #[arg(long)]
    pub fit: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub kind: KindArgs,
    /// CSV with columns `r` and `u` on a log-uniform grid.
    #[arg(long)]
    pub input: PathBuf,
    /// Bubble signs from outer to inner, e.g. `++` or `+-`.
    #[arg(long, value_parser = parse_signs, allow_hyphen_values = true)]
    pub signs: ::std::vec::Vec<i8>,
    /// Initial guess for the scales, outer to inner.
    #[arg(long, value_parser = parse_list)]
    pub guess: ::std::vec::Vec<f64>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directories to aggregate; defaults to every run under the output root.
    pub runs: Vec<PathBuf>,
}

/// `+`/`-` per bubble.
pub fn parse_signs(text: &str) -> Result<Vec<i8>, String> {
    if text.is_empty() {
        return Err("empty sign string".into());
    }
    text.chars()
        .map(|c| match c {
            '+' => Ok(1),
            '-' => Ok(-1),
            other => Err(format!("sign string may only contain '+' and '-', found {other:?}")),
        })
        .collect()
}

pub fn parse_list(text: &str) -> Result<Vec<f64>, String> {
    text.split(',').map(|s| s.trim().parse::<f64>().map_err(|e| format!("{s:?}: {e}"))).collect()
}

pub fn parse_span(text: &str) -> Result<(f64, f64), String> {
    let (a, b) = text.split_once(':').ok_or("time span must look like t0:t1")?;
    let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("{s:?}: {e}"));
    Ok((parse(a)?, parse(b)?))
}

pub fn require(condition: bool, message: impl Into<String>) -> CliResult<()> {
    if condition {
        Ok(())
    } else {
        Err(usage(message))
    }
}

/// Positive, strictly decreasing scales with one sign each.
pub fn check_scales(signs: &[i8], lambdas: &[f64]) -> CliResult<()> {
    require(signs.len() == lambdas.len(), format!("{} signs for {} scales", signs.len(), lambdas.len()))?;
    require(
        lambdas.iter().all(|l| l.is_finite() && *l > 0.0) && lambdas.windows(2).all(|w| w[1] < w[0]),
        "scales must be positive and strictly decreasing",
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signs_parse() {
        assert_eq!(parse_signs("+-+").unwrap(), vec![1, -1, 1]);
        assert!(parse_signs("+x").is_err());
        assert!(parse_signs("").is_err());
    }

    #[test]
    fn spans_and_lists_parse() {
        assert_eq!(parse_span("1:1e4").unwrap(), (1.0, 1e4));
        assert!(parse_span("1-1e4").is_err());
        assert_eq!(parse_list("1, 0.1").unwrap(), vec![1.0, 0.1]);
        assert!(parse_list("1,,2").is_err());
    }

    #[test]
    fn kind_flags_must_match() {
        let ok = KindArgs { kind: KindName::Nlh, equivariance: None, dimension: Some(8) };
        assert_eq!(ok.resolve().unwrap(), EquationKind::nlh(8).unwrap());
        let mixed = KindArgs { kind: KindName::Hmhf, equivariance: Some(3), dimension: Some(8) };
        assert!(mixed.resolve().is_err());
    }
}
