//! Velocity-space quadrature and the periodic Galerkin basis.

mod fourier;
mod gauss;
mod velocity;

pub use fourier::{
    build_fourier_basis, build_fourier_basis_with_grid, integrate_spatial, spectral_derivative,
    BasisFunction, BasisKind, FourierBasis,
};
pub use gauss::{gauss_legendre, gauss_legendre_on};
pub use velocity::{
    build_velocity_quadrature, build_with_radius, integrate_velocity, pairwise_sum,
    VelocityNode, VelocityQuadrature,
};
