//! Numerical laboratory for the magnetic Schrödinger equation
//! `i u_t = -(∇ - iA)² u + V u` on a bounded cube.
//!
//! The crate discretizes the magnetic Laplacian with link variables,
//! propagates data with Crank-Nicolson, and evaluates the Morawetz-type
//! virial identity, the resulting smoothing estimates and the magnetic Hardy
//! inequality for a family of radial multipliers.

pub mod error;
pub mod estimates;
pub mod grid;
pub mod multiplier;
pub mod operators;
mod par;
pub mod potentials;
pub mod solver;

pub use error::{Error, Result};
