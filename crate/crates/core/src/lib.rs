//! Numerics for scalar cubic ODEs with quasiperiodic coefficients,
//! `x' = scale(t)·(−x³ + c(t)x² + ε(b(t)x + a(t)))`: bounded solutions
//! (branches), their Lyapunov exponents, and the parameter values where
//! branches collide.

pub mod bifurcate;
pub mod branches;
pub mod coeffs;
pub mod field;
pub mod integrate;
pub mod lyapunov;
pub mod numerics;
pub mod popmodel;

pub use bifurcate::{
    autonomous_bifurcations, bisect_bifurcation, bisect_transcritical, has_three_branches, sweep,
    BifurcationError, BifurcationReport, ScanRow,
};
pub use branches::{
    branch_set, first_crossing, locate_attractive, locate_repulsive, Branch, BranchError, BranchSet,
    Stability,
};
pub use coeffs::{Coeff, Harmonic, TrigPoly, Wave};
pub use field::{discriminant, frozen_roots, ConstantTerm, CubicField, RegimeClass, RegimeKind};
pub use integrate::{rk4_integrate, Rk4, ScalarOde, Trajectory};
pub use lyapunov::{lyap_bounds, truncated_exponent, LyapBounds};
pub use numerics::Numerics;
pub use popmodel::{critical_intensity, simulate_population, Outcome, PopScenario};
