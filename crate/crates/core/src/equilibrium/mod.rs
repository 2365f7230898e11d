//! Purely magnetic equilibria: profiles, validation, and the weak-field
//! construction of `ψ⁰` as a center of `ψ'' = g(ψ)`.

mod center;
mod golden;
mod potential;
mod profile;
mod validate;

pub use center::{
    check_center_conditions, find_center_basin, g_value, solve_center_orbit,
    solve_equilibrium_potential, stability_condition, CenterConditions, CenterOptions,
    CenterOrbit, Chebyshev, OdeOptions, StabilityCondition,
};
pub use golden::{moment_i_exact, radial_moments, tail_moment_exact, RadialMoments};
pub use potential::{EquilibriumState, MagneticPotential, PotentialSolution};
pub use profile::{
    Anisotropic, Distribution, EquilibriumProfile, FnProfile, PaperHomogeneous, Species,
    WeakFieldFamily, WeightSpec, ZeroProfile,
};
pub use validate::{validate_profile, ValidationGrid, ValidationReport};
