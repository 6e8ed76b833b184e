//! Kron reduction of noisy swing-equation dynamics.
//!
//! Eliminating fast (load) buses from the linearized swing equations gives
//! the usual Kron-reduced Jacobian, but the noise acting on the eliminated
//! buses does not disappear: it reaches the retained buses through the map
//! `K = -J_SF J_FF^-1` and is correlated across them. This crate computes the
//! reduction, the resulting closed-form center-of-inertia frequency
//! variances, and simulates the full and reduced models to check both.
//!
//! The pipeline:
//!
//! 1. [`grid`]: parse a grid, solve the synchronized fixed point, linearize.
//! 2. [`kron`]: Schur-complement reduction and the effective noise.
//! 3. [`spectral`]: modal analysis and the variance formula, with an
//!    independent Lyapunov oracle.
//! 4. [`sim`]: exact OU noise, drift-implicit integrators, ensembles.
//! 5. [`cli`]: the commands behind the `kron-noise` binary.

pub mod cli;
pub mod error;
pub mod grid;
pub mod kron;
pub mod scenarios;
pub mod sim;
pub mod spectral;

pub use error::{Error, Result};
