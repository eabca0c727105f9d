//! Numerical laboratory for the 1-D Schrödinger equation with a potential and
//! white-noise dispersion, `i du = H u ∘ dβ` with `H = -Δ + V`.
//!
//! The crate is organised bottom-up:
//!
//! * [`grid`]: spatial grid, potential families and weighted `L¹` norms.
//! * [`scattering`]: Jost solutions, Wronskian, resonance detection,
//!   scattering coefficients and the Jost form of the perturbed resolvent.
//! * [`spectral`]: finite-difference Hamiltonian, eigendecomposition, `P_ac`,
//!   unitary propagation, free resolvent, Born series and Stone's formula.
//! * [`resolvent`]: shifted tridiagonal solves used for limiting-absorption
//!   boundary values `R(E ± i0)`.
//! * [`initial`]: initial data for the propagation experiments.
//! * [`stochastic`]: Brownian ensembles, the time-changed propagator and an
//!   Euler–Maruyama integrator for the Itô form.
//! * [`estimates`]: mixed norms, exponent fitting and the Monte Carlo
//!   experiments for the dispersive and Strichartz bounds.
//! * [`runner`]: config parsing and the reproducible experiment driver.

pub mod error;
pub mod estimates;
pub mod grid;
pub mod initial;
pub mod quadrature;
pub mod resolvent;
pub mod runner;
pub mod scattering;
pub mod spectral;
pub mod stochastic;

pub use error::{LabError, Result};
pub use num_complex::Complex64;

pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);
