//! Linear instability analysis for purely magnetic equilibria of the
//! one-and-a-half dimensional relativistic Vlasov–Maxwell system.
//!
//! The pipeline assembles the Galerkin matrix `M^λ_n` from orbit integrals,
//! counts its negative eigenvalues across `λ`, locates a kernel crossing, and
//! rebuilds the growing mode with a residual check of every linearized
//! equation.

pub mod characteristics;
pub mod discretization;
pub mod equilibrium;
pub mod error;
pub mod growing_mode;
pub mod operators;
pub mod spectra;

pub use error::{Error, Result};
