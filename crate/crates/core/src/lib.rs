//! Numerical tools for the dilute Bose gas: scattering solutions, Neumann
//! problems on balls, lattice sums, Bogoliubov spectra and variational Monte Carlo.

pub mod bogoliubov;
pub mod error;
pub mod ode;
pub mod quadrature;
pub mod lattice;
pub mod neumann;
pub mod scattering;
pub mod vmc;

pub use error::{Error, Result};
