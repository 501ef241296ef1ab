//! Displacement-noise budgeting, time-domain simulation, and signal recovery
//! for a milligram-scale pendulum mirror that is stiffened by an optical
//! spring and read out interferometrically.
//!
//! The crate models the full measurement chain of such a gravimeter:
//!
//! * [`model`] — optical-spring stiffening, dissipation dilution, effective
//!   temperature, and the driven-oscillator susceptibility.
//! * [`budget`] — suspension thermal noise (structural damping), laser
//!   frequency noise shaped by the optical spring, a flat sensing floor, and
//!   the residual-gas damping limit, combined into a named noise budget.
//! * [`gravity`] — the Newtonian drive from a position-modulated source mass:
//!   closed-form resonant displacement, exact harmonic decomposition, SNR and
//!   integration-time bookkeeping.
//! * [`timeseries`] — colored-noise synthesis from any budget PSD, tone
//!   injection, calibration to recorded volts, and the record file format.
//! * [`spectral`] — Welch PSD estimation, resonance-peak fitting, lock-in
//!   demodulation, and ringdown analysis.
//! * [`optimize`] — bounded derivative-free search over experiment parameters.
//! * [`cli`] — the `milligrav` command line: `budget`, `gravity`, `simulate`,
//!   `analyze`, `optimize`.
//!
//! Grid and ensemble evaluations are data-parallel via rayon when the default
//! `parallel` feature is enabled; disabling it yields a dependency-free
//! sequential build with identical (byte-deterministic) results.

pub mod budget;
pub mod cli;
pub mod config;
pub mod error;
pub mod gravity;
pub mod model;
pub mod optimize;
mod parallel;
pub mod spectral;
pub mod timeseries;

pub use config::SystemConfig;
pub use error::{Error, Result};

/// Newtonian gravitational constant, m^3 kg^-1 s^-2.
pub const GRAVITATIONAL_CONSTANT: f64 = 6.674e-11;

/// Boltzmann constant, J/K.
pub const BOLTZMANN_CONSTANT: f64 = 1.380649e-23;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
