//! Harmonic-balance simulation of flux-tunable SNAIL traveling-wave
//! parametric amplifiers.
//!
//! The crate is organised bottom-up:
//!
//! - [`snail`]: current-phase relation of a single SNAIL and its
//!   flux-dependent Taylor coefficients.
//! - [`netlist`]: typed circuit graph, a small SPICE-like text format and
//!   the N-cell amplifier builder.
//! - [`hb`]: linear AC analysis and the nonlinear pump steady state by
//!   harmonic balance.
//! - [`smallsignal`]: conversion-matrix linearization around the pump and
//!   gain sweeps.
//! - [`tdoracle`]: brute-force transient integrator used to cross-check the
//!   frequency-domain solvers on small circuits.

pub mod circuit;
pub mod error;
pub mod hb;
pub mod linalg;
pub mod netlist;
pub mod smallsignal;
pub mod snail;
pub mod tdoracle;
pub mod units;

pub use error::{Error, Result};

/// Magnetic flux quantum h/2e in webers.
pub const FLUX_QUANTUM: f64 = 6.626_070_15e-34 / (2.0 * 1.602_176_634e-19);

/// Φ₀/2π, the flux corresponding to one radian of superconducting phase.
pub const REDUCED_FLUX_QUANTUM: f64 = FLUX_QUANTUM / std::f64::consts::TAU;
