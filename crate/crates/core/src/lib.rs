//! Numerical laboratory for bubble-tree dynamics of energy-critical radial heat flows.
//!
//! Two equations share one notation: the D-equivariant harmonic map heat flow (HMHF)
//! and the radial critical nonlinear heat equation (NLH) in dimension `N = 2D + 2`.
//! The crate provides ground states, the inverse of the linearized operator, the
//! modified multi-bubble profiles with their residuals, the universal rate constants,
//! the reduced modulation ODE, a full PDE integrator and a scale fitter.
//!
//! Everything numerical is generic over [`Real`]; the `*64` aliases fix `f64`.

// Parameter checks are written as negated comparisons so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod dynamics;
pub mod equation;
pub mod error;
pub mod evolution;
pub mod fit;
pub mod grid;
pub mod inequalities;
pub mod kernel;
pub mod ode;
pub mod profile;
pub mod quad;
pub mod real;
pub mod tridiag;

pub use equation::{EquationKind, GroundState};
pub use error::{Error, Result};
pub use grid::{FieldKind, Norms, RadialField, RadialGrid, Stencil};
pub use real::Real;

pub type RadialGrid64 = grid::RadialGrid<f64>;
pub type RadialField64 = grid::RadialField<f64>;
pub type GroundState64 = equation::GroundState<f64>;
pub type KernelPair64 = kernel::KernelPair<f64>;
pub type RateTable64 = constants::RateTable<f64>;
pub type BubbleConfig64 = profile::BubbleConfig<f64>;
pub type ModifiedProfile64 = profile::ModifiedProfile<f64>;
pub type ScaleTrajectory64 = dynamics::ScaleTrajectory<f64>;
pub type EvolutionState64 = evolution::EvolutionState<f64>;
pub type FitResult64 = fit::FitResult<f64>;
