use std::sync::Arc;

use bubbletree::constants::kappa_explicit;
use bubbletree::kernel::KernelPair;
use bubbletree::profile::{
    build_profile, envelope_constants, smallest_a0, BubbleConfig, ModifiedProfile, ProfileSettings,
};
use bubbletree::{EquationKind, RadialGrid};

fn profile(kind: EquationKind, iotas: &[i8], lambdas: &[f64]) -> ModifiedProfile<f64> {
    let grid = Arc::new(RadialGrid::log_uniform(1e-6, 1e4, 4000).unwrap());
    let pair = KernelPair::build(kind).unwrap();
    let cfg = BubbleConfig::new(iotas.to_vec(), lambdas.to_vec()).unwrap();
    build_profile(kind, &grid, &pair, kappa_explicit(kind).unwrap(), &cfg, &ProfileSettings::default()).unwrap()
}

#[test]
fn single_nlh_bubble_is_its_own_envelope() {
    let kind = EquationKind::nlh(8).unwrap();
    let report = envelope_constants(&profile(kind, &[1], &[0.5]), 10.0);
    let (lo, hi) = report.ratios[0].unwrap();
    assert!((lo - 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12, "{lo} {hi}");
}

#[test]
fn separated_nlh_pairs_admit_a_finite_a0() {
    let kind = EquationKind::nlh(8).unwrap();
    for iotas in [[1, 1], [1, -1]] {
        let built = profile(kind, &iotas, &[1.0, 1e-4]);
        let a0 = smallest_a0(&built, 2.0).unwrap().unwrap_or_else(|| panic!("{iotas:?}"));
        assert!((10.0..1e2).contains(&a0), "{iotas:?}: {a0}");
        assert!(envelope_constants(&built, a0).holds(2.0));
    }
}

#[test]
fn hmhf_envelope_constant_is_bounded_by_the_annulus_edge() {
    let kind = EquationKind::hmhf(3).unwrap();
    for iotas in [[1, 1], [1, -1]] {
        let built = profile(kind, &iotas, &[1.0, 1e-4]);
        for a0 in [10.0, 20.0] {
            // Near the inner edge of the first annulus the ratio is about 2 A₀^{2D}; the core adds 2^D.
            let report = envelope_constants(&built, a0);
            for ratio in &report.ratios {
                let (_, hi) = ratio.unwrap();
                assert!(hi <= 8.0 * a0.powi(6), "{iotas:?} A₀ = {a0}: {hi}");
            }
        }
        assert!(smallest_a0(&built, 2.0).is_err());
    }
}
