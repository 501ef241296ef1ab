//! Closed-form oscillator model: optical-spring stiffening, dissipation
//! dilution, effective temperature, Qf product, and the driven-oscillator
//! susceptibility.
//!
//! All functions are pure; every value is immutable after construction and
//! safe to evaluate concurrently.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::config::{CavityConfig, PendulumConfig, SystemConfig};
use crate::error::{Error, Result};

/// Loss model of the suspension.
///
/// Structural damping has a frequency-independent loss angle (dissipation
/// rate falling as 1/f); viscous damping has a frequency-independent
/// velocity-damping rate. Both give `|chi| = Q/(m w_m^2)` on resonance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DampingModel {
    Structural,
    Viscous,
}

/// Quantities derived from a [`SystemConfig`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedOscillator {
    /// Optically trapped resonance, Hz.
    pub trapped_frequency: f64,
    /// Elastic + gravitational pendulum stiffness m*(2 pi f0)^2, N/m.
    pub pendulum_stiffness: f64,
    /// Pendulum + optical stiffness, N/m.
    pub total_stiffness: f64,
    /// Dissipation-diluted natural quality factor at the trapped frequency.
    pub natural_quality_at_trap: f64,
    /// Feedback-controlled effective quality factor.
    pub effective_quality: f64,
    /// Mode temperature implied by dilution at the trapped frequency, K.
    pub effective_temperature: f64,
    /// Quality factor times frequency of the trapped mode, Hz.
    pub qf_product: f64,
}

impl DerivedOscillator {
    /// Probe mass recovered from stiffness and frequency, kg.
    pub fn probe_mass(&self) -> f64 {
        self.total_stiffness / (TAU * self.trapped_frequency).powi(2)
    }
}

/// Stiffness of the bare pendulum mode, N/m.
pub fn pendulum_stiffness(pendulum: &PendulumConfig) -> f64 {
    pendulum.probe_mass * (TAU * pendulum.natural_frequency).powi(2)
}

/// Optical stiffness that traps the pendulum at `target_hz`, N/m.
///
/// Inverts the stiffness relation; the config may specify the spring either
/// way since only the resulting resonance is observable.
pub fn optical_stiffness_for_trap(pendulum: &PendulumConfig, target_hz: f64) -> f64 {
    pendulum.probe_mass * (TAU * target_hz).powi(2) - pendulum_stiffness(pendulum)
}

/// Resonance of the optically trapped pendulum, Hz.
///
/// Errors with [`Error::UnstableTrap`] when the optical spring cancels the
/// pendulum stiffness.
pub fn trapped_frequency(pendulum: &PendulumConfig, cavity: &CavityConfig) -> Result<f64> {
    let total = pendulum_stiffness(pendulum) + cavity.optical_stiffness;
    if total <= 0.0 {
        return Err(Error::UnstableTrap { total_stiffness: total });
    }
    Ok((total / pendulum.probe_mass).sqrt() / TAU)
}

/// Dissipation-diluted quality factor at the trapped frequency:
/// `Q0 (f_m/f0)^2 / chi`, where `chi >= 1` is the mode-mixing penalty.
pub fn diluted_quality(pendulum: &PendulumConfig, trapped_frequency_hz: f64) -> f64 {
    pendulum.natural_quality * (trapped_frequency_hz / pendulum.natural_frequency).powi(2)
        / pendulum.mode_mixing_factor
}

/// Mode temperature implied by dilution: `chi T (f0/f_m)^2 / Q0`, K.
pub fn effective_temperature(
    pendulum: &PendulumConfig,
    trapped_frequency_hz: f64,
    bath_temperature_k: f64,
) -> f64 {
    pendulum.mode_mixing_factor * bath_temperature_k / pendulum.natural_quality
        * (pendulum.natural_frequency / trapped_frequency_hz).powi(2)
}

/// Quality factor times frequency, Hz.
pub fn qf_product(quality: f64, frequency_hz: f64) -> f64 {
    quality * frequency_hz
}

/// Displacement response per unit force of the damped oscillator, m/N.
///
/// Structural: `1 / (m (w_m^2 - w^2) + i m w_m^2 / Q)`.
/// Viscous:    `1 / (m (w_m^2 - w^2) + i m w_m w / Q)`.
pub fn susceptibility(
    resonance_hz: f64,
    mass_kg: f64,
    quality: f64,
    model: DampingModel,
    frequency_hz: f64,
) -> Complex64 {
    let wm = TAU * resonance_hz;
    let w = TAU * frequency_hz;
    let real = mass_kg * (wm * wm - w * w);
    let imag = match model {
        DampingModel::Structural => mass_kg * wm * wm / quality,
        DampingModel::Viscous => mass_kg * wm * w / quality,
    };
    Complex64::new(real, imag).inv()
}

/// Adiabatic optical-spring stiffness for a cavity detuned by `detuning`
/// half-linewidths, N/m. Model, not a measured transfer function: assumes an
/// impedance-matched cavity responding instantaneously to mirror motion,
/// `K = 32 F^2 P delta / (pi c lambda (1 + delta^2)^2)`.
///
/// The default configuration path takes the spring stiffness (or the target
/// trap frequency) directly; this helper exists for what-if studies.
pub fn adiabatic_optical_spring(
    finesse: f64,
    input_power_w: f64,
    wavelength_m: f64,
    detuning_linewidths: f64,
) -> f64 {
    let d = detuning_linewidths;
    32.0 * finesse * finesse * input_power_w * d
        / (std::f64::consts::PI * crate::SPEED_OF_LIGHT * wavelength_m * (1.0 + d * d).powi(2))
}

/// Derive the trapped-oscillator quantities for a validated config.
pub fn derive(cfg: &SystemConfig) -> Result<DerivedOscillator> {
    cfg.validate()?;
    let fm = trapped_frequency(&cfg.pendulum, &cfg.cavity)?;
    let k0 = pendulum_stiffness(&cfg.pendulum);
    let q_nat = diluted_quality(&cfg.pendulum, fm);
    Ok(DerivedOscillator {
        trapped_frequency: fm,
        pendulum_stiffness: k0,
        total_stiffness: k0 + cfg.cavity.optical_stiffness,
        natural_quality_at_trap: q_nat,
        effective_quality: cfg.feedback.target_quality,
        effective_temperature: effective_temperature(
            &cfg.pendulum,
            fm,
            cfg.environment.temperature,
        ),
        qf_product: qf_product(q_nat, fm),
    })
}
