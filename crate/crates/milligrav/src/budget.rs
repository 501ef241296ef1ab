//! Displacement-noise budget on a frequency grid: suspension thermal noise
//! under structural damping, laser frequency noise shaped by the optical
//! spring, a flat sensing floor, the residual-gas damping limit, and their
//! pointwise total.
//!
//! Each frequency point is independent; grid evaluation is data-parallel.

use crate::config::{CavityConfig, EnvironmentConfig, PendulumConfig, SystemConfig};
use crate::error::{Error, Result};
use crate::model::{self, DampingModel, DerivedOscillator};
use crate::parallel;
use crate::BOLTZMANN_CONSTANT;

/// Strictly increasing, positive, non-empty frequency grid, Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid(Vec<f64>);

impl FrequencyGrid {
    pub fn new(frequencies: Vec<f64>) -> Result<Self> {
        if frequencies.is_empty() {
            return Err(Error::BadGrid("empty".into()));
        }
        if !frequencies[0].is_finite() || frequencies[0] <= 0.0 {
            return Err(Error::BadGrid(format!(
                "first frequency {:e} is not positive",
                frequencies[0]
            )));
        }
        for w in frequencies.windows(2) {
            if !w[1].is_finite() || w[1] <= w[0] {
                return Err(Error::BadGrid(format!(
                    "not strictly increasing at {:e} -> {:e}",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self(frequencies))
    }

    /// `n` logarithmically spaced points covering `[lo, hi]`.
    pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo > 0.0 && hi > lo && n >= 2) {
            return Err(Error::BadGrid(format!("bad log grid [{lo:e}, {hi:e}] x {n}")));
        }
        let (llo, lhi) = (lo.ln(), hi.ln());
        let freqs = (0..n)
            .map(|i| (llo + (lhi - llo) * i as f64 / (n - 1) as f64).exp())
            .collect();
        Self::new(freqs)
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false // non-empty by construction
    }

    pub fn min(&self) -> f64 {
        self.0[0]
    }

    pub fn max(&self) -> f64 {
        *self.0.last().unwrap()
    }
}

/// What a PSD's values describe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsdKind {
    /// Displacement, m^2/Hz.
    Displacement,
    /// Force, N^2/Hz.
    Force,
    /// Fractional laser frequency y = dnu/nu, 1/Hz.
    Fractional,
}

/// One-sided power spectral density sampled on a frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Psd {
    grid: FrequencyGrid,
    values: Vec<f64>,
    kind: PsdKind,
}

impl Psd {
    pub fn new(grid: FrequencyGrid, values: Vec<f64>, kind: PsdKind) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::BadPsd(format!(
                "{} values on a {}-point grid",
                values.len(),
                grid.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::BadPsd(format!("value {v:e} is negative or non-finite")));
        }
        Ok(Self { grid, values, kind })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> PsdKind {
        self.kind
    }

    /// Amplitude spectral density, element-wise sqrt of the PSD.
    pub fn asd(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.sqrt()).collect()
    }

    /// PSD value at frequency `f`, interpolating between grid points
    /// (log-log where both endpoints are positive, linear otherwise).
    /// Errors if `f` lies outside the grid span.
    pub fn value_at(&self, f: f64) -> Result<f64> {
        let xs = self.grid.frequencies();
        if f < xs[0] || f > *xs.last().unwrap() {
            return Err(Error::BandNotCovered {
                need_lo: f,
                need_hi: f,
                have_lo: xs[0],
                have_hi: *xs.last().unwrap(),
            });
        }
        let i = match xs.binary_search_by(|x| x.partial_cmp(&f).unwrap()) {
            Ok(i) => return Ok(self.values[i]),
            Err(i) => i - 1, // f > xs[0] here, so i >= 1
        };
        let (x0, x1) = (xs[i], xs[i + 1]);
        let (v0, v1) = (self.values[i], self.values[i + 1]);
        if v0 > 0.0 && v1 > 0.0 {
            let t = (f.ln() - x0.ln()) / (x1.ln() - x0.ln());
            Ok((v0.ln() + t * (v1.ln() - v0.ln())).exp())
        } else {
            let t = (f - x0) / (x1 - x0);
            Ok(v0 + t * (v1 - v0))
        }
    }
}

/// Named component PSDs and their pointwise total on a shared grid.
#[derive(Debug, Clone)]
pub struct NoiseBudget {
    components: Vec<(String, Psd)>,
    total: Psd,
}

impl NoiseBudget {
    pub fn components(&self) -> &[(String, Psd)] {
        &self.components
    }

    pub fn component(&self, name: &str) -> Option<&Psd> {
        self.components.iter().find(|(n, _)| n == name).map(|(_, p)| p)
    }

    pub fn total(&self) -> &Psd {
        &self.total
    }

    pub fn grid(&self) -> &FrequencyGrid {
        self.total.grid()
    }

    /// CSV export: `frequency_hz,<component>_asd_m_rthz,...,total_asd_m_rthz`
    /// with values in scientific notation at 10 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("frequency_hz");
        for (name, _) in &self.components {
            out.push_str(&format!(",{name}_asd_m_rthz"));
        }
        out.push_str(",total_asd_m_rthz\n");
        for (i, f) in self.grid().frequencies().iter().enumerate() {
            out.push_str(&format!("{f:.9e}"));
            for (_, psd) in &self.components {
                out.push_str(&format!(",{:.9e}", psd.values()[i].sqrt()));
            }
            out.push_str(&format!(",{:.9e}\n", self.total.values()[i].sqrt()));
        }
        out
    }
}

/// Suspension thermal displacement PSD at one frequency, m^2/Hz.
///
/// Structural-damping fluctuation-dissipation force noise
/// `S_F = 4 kB T k_total phi / w` with loss angle `phi = 1/Q_nat` taken
/// frequency-independent and evaluated with the dilution at the trap, driven
/// through the feedback-controlled susceptibility: cold damping reshapes the
/// line (effective Q) without adding force noise (natural Q).
pub fn thermal_displacement_psd_at(
    derived: &DerivedOscillator,
    temperature_k: f64,
    f: f64,
) -> f64 {
    let w = std::f64::consts::TAU * f;
    let phi = 1.0 / derived.natural_quality_at_trap;
    let force_psd = 4.0 * BOLTZMANN_CONSTANT * temperature_k * derived.total_stiffness * phi / w;
    let chi = model::susceptibility(
        derived.trapped_frequency,
        derived.probe_mass(),
        derived.effective_quality,
        DampingModel::Structural,
        f,
    );
    force_psd * chi.norm_sqr()
}

/// Suspension thermal noise PSD on a grid.
pub fn suspension_thermal_psd(
    derived: &DerivedOscillator,
    env: &EnvironmentConfig,
    grid: &FrequencyGrid,
) -> Result<Psd> {
    let d = *derived;
    let t = env.temperature;
    let values = parallel::map_f64(grid.frequencies(), move |f| {
        thermal_displacement_psd_at(&d, t, f)
    });
    Psd::new(grid.clone(), values, PsdKind::Displacement)
}

/// Optical-spring gain from cavity-length (displacement-equivalent laser
/// frequency) noise to mirror displacement at one frequency, power units.
fn spring_filter_gain(cavity: &CavityConfig, derived: &DerivedOscillator, f: f64) -> f64 {
    let chi = model::susceptibility(
        derived.trapped_frequency,
        derived.probe_mass(),
        derived.effective_quality,
        DampingModel::Structural,
        f,
    );
    (cavity.optical_stiffness * chi.norm()).powi(2) + 1.0
}

/// Laser-frequency-noise displacement PSD at one frequency, m^2/Hz, from a
/// flat frequency-noise ASD level in Hz/sqrt(Hz).
///
/// The fluctuating laser frequency is equivalent to a cavity length error
/// `x_nu = (L/nu) dnu`; the optical spring converts that sensed error into
/// real mirror motion through `K_opt chi(w)`, so the component peaks at the
/// trapped resonance on top of the unfiltered sensing floor.
pub fn frequency_noise_psd_at(
    laser_asd_hz_rthz: f64,
    cavity: &CavityConfig,
    derived: &DerivedOscillator,
    f: f64,
) -> f64 {
    let nu = crate::SPEED_OF_LIGHT / cavity.wavelength;
    let x_nu = cavity.round_trip_length * laser_asd_hz_rthz / nu;
    x_nu * x_nu * spring_filter_gain(cavity, derived, f)
}

/// Laser-frequency-noise displacement PSD on a grid from a fractional
/// frequency-noise input PSD (kind [`PsdKind::Fractional`], units 1/Hz)
/// defined on the same grid.
pub fn frequency_noise_psd(
    laser: &Psd,
    cavity: &CavityConfig,
    derived: &DerivedOscillator,
    grid: &FrequencyGrid,
) -> Result<Psd> {
    if laser.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let l = cavity.round_trip_length;
    let cav = *cavity;
    let d = *derived;
    let sy = laser.values().to_vec();
    let values = parallel::map_index(grid.len(), move |i| {
        let f = grid.frequencies()[i];
        // S_y (1/Hz) -> displacement-equivalent S_x = (L y)^2 per Hz
        l * l * sy[i] * spring_filter_gain(&cav, &d, f)
    });
    Psd::new(grid.clone(), values, PsdKind::Displacement)
}

/// Fractional frequency-noise PSD (1/Hz) for a flat ASD level in
/// Hz/sqrt(Hz) at carrier `nu = c/lambda`.
pub fn laser_fractional_psd(
    level_hz_rthz: f64,
    cavity: &CavityConfig,
    grid: &FrequencyGrid,
) -> Result<Psd> {
    if level_hz_rthz < 0.0 {
        return Err(Error::Invariant {
            field: "noise.laser_frequency_asd_hz_rthz",
            msg: format!("must be >= 0, got {level_hz_rthz:e}"),
        });
    }
    let nu = crate::SPEED_OF_LIGHT / cavity.wavelength;
    let sy = (level_hz_rthz / nu).powi(2);
    Psd::new(grid.clone(), vec![sy; grid.len()], PsdKind::Fractional)
}

/// Flat displacement-equivalent sensing floor: constant PSD `level^2`.
pub fn intensity_noise_floor(level_m_rthz: f64, grid: &FrequencyGrid) -> Result<Psd> {
    if level_m_rthz.is_nan() || level_m_rthz < 0.0 {
        return Err(Error::Invariant {
            field: "noise.intensity_floor_m_rthz",
            msg: format!("must be >= 0, got {level_m_rthz:e}"),
        });
    }
    let v = level_m_rthz * level_m_rthz;
    Psd::new(grid.clone(), vec![v; grid.len()], PsdKind::Displacement)
}

/// Face diameter of the movable mirror, m. The config carries no geometry,
/// so the gas-damping estimate uses the 3 mm disc of the canonical setup.
pub const MIRROR_FACE_DIAMETER: f64 = 3e-3;

/// Mean molar mass of air, kg/mol.
const AIR_MOLAR_MASS: f64 = 28.97e-3;

/// Avogadro constant, 1/mol.
const AVOGADRO: f64 = 6.02214076e23;

/// Residual-gas damping rate of the mirror, Hz.
///
/// Free-molecular-flow kinetic estimate for a disc exchanging momentum with
/// the gas on both faces: `gamma = 2 P A / (m vbar)` in rad/s with
/// `vbar = sqrt(8 kB T / (pi m_gas))` the mean molecular speed, reported
/// here divided by 2 pi. At 1e-5 Pa and the canonical geometry this is a
/// few nHz.
pub fn gas_damping_rate_hz(env: &EnvironmentConfig, pendulum: &PendulumConfig) -> f64 {
    let m_gas = AIR_MOLAR_MASS / AVOGADRO;
    let vbar =
        (8.0 * BOLTZMANN_CONSTANT * env.temperature / (std::f64::consts::PI * m_gas)).sqrt();
    let area = std::f64::consts::PI * (MIRROR_FACE_DIAMETER / 2.0).powi(2);
    let gamma_rad = 2.0 * env.pressure * area / (pendulum.probe_mass * vbar);
    gamma_rad / std::f64::consts::TAU
}

/// Quality-factor ceiling from residual-gas damping: `w_m / gamma_gas`
/// (both in angular units). Zero pressure returns infinity.
pub fn gas_damping_limit(
    env: &EnvironmentConfig,
    pendulum: &PendulumConfig,
    trapped_frequency_hz: f64,
) -> f64 {
    let gamma = gas_damping_rate_hz(env, pendulum);
    if gamma == 0.0 {
        return f64::INFINITY;
    }
    trapped_frequency_hz / gamma
}

/// Combine named displacement components into a budget with their pointwise
/// total. All components must share one grid.
pub fn total_budget(components: Vec<(String, Psd)>) -> Result<NoiseBudget> {
    let first = components
        .first()
        .ok_or_else(|| Error::BadPsd("budget needs at least one component".into()))?;
    let grid = first.1.grid().clone();
    for (_, psd) in &components {
        if psd.grid() != &grid {
            return Err(Error::GridMismatch);
        }
    }
    let mut total = vec![0.0; grid.len()];
    for (_, psd) in &components {
        for (t, v) in total.iter_mut().zip(psd.values()) {
            *t += v;
        }
    }
    let total = Psd::new(grid, total, PsdKind::Displacement)?;
    Ok(NoiseBudget { components, total })
}

/// The default three-component budget (thermal, frequency, intensity) for a
/// configuration, on the given grid.
pub fn default_budget(
    cfg: &SystemConfig,
    derived: &DerivedOscillator,
    grid: &FrequencyGrid,
) -> Result<NoiseBudget> {
    let thermal = suspension_thermal_psd(derived, &cfg.environment, grid)?;
    let laser = laser_fractional_psd(cfg.noise.laser_frequency_asd, &cfg.cavity, grid)?;
    let frequency = frequency_noise_psd(&laser, &cfg.cavity, derived, grid)?;
    let intensity = intensity_noise_floor(cfg.noise.intensity_floor, grid)?;
    total_budget(vec![
        ("thermal".into(), thermal),
        ("frequency".into(), frequency),
        ("intensity".into(), intensity),
    ])
}

/// Total budget PSD at a single frequency, m^2/Hz (no grid allocation).
pub fn total_psd_at(cfg: &SystemConfig, derived: &DerivedOscillator, f: f64) -> f64 {
    thermal_displacement_psd_at(derived, cfg.environment.temperature, f)
        + frequency_noise_psd_at(cfg.noise.laser_frequency_asd, &cfg.cavity, derived, f)
        + cfg.noise.intensity_floor * cfg.noise.intensity_floor
}

/// Total budget ASD at a single frequency, m/sqrt(Hz).
pub fn total_asd_at(cfg: &SystemConfig, derived: &DerivedOscillator, f: f64) -> f64 {
    total_psd_at(cfg, derived, f).sqrt()
}

/// Grid used by the `budget` subcommand: log-spaced over the band plus a
/// linear refinement across the trapped resonance so the narrow peak is
/// actually sampled.
pub fn budget_grid(band: (f64, f64), points: usize, resonance_hz: f64) -> Result<FrequencyGrid> {
    let base = FrequencyGrid::log_spaced(band.0, band.1, points.max(2))?;
    let mut freqs = base.frequencies().to_vec();
    let half_width = resonance_hz.max(1.0) * 0.06;
    let step = half_width / 150.0;
    let mut f = resonance_hz - half_width;
    while f <= resonance_hz + half_width {
        if f > band.0 && f < band.1 {
            freqs.push(f);
        }
        f += step;
    }
    freqs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    freqs.dedup_by(|a, b| (*a - *b).abs() <= f64::EPSILON * a.abs());
    FrequencyGrid::new(freqs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    fn canonical() -> (SystemConfig, DerivedOscillator) {
        let cfg = SystemConfig::default();
        let d = cfg.derive().unwrap();
        (cfg, d)
    }

    #[test]
    fn grid_construction_rules() {
        assert!(matches!(FrequencyGrid::new(vec![]), Err(Error::BadGrid(_))));
        assert!(matches!(FrequencyGrid::new(vec![0.0, 1.0]), Err(Error::BadGrid(_))));
        assert!(matches!(FrequencyGrid::new(vec![1.0, 1.0]), Err(Error::BadGrid(_))));
        let g = FrequencyGrid::log_spaced(10.0, 1e5, 11).unwrap();
        assert_eq!(g.len(), 11);
        assert!(rel(g.min(), 10.0) < 1e-12 && rel(g.max(), 1e5) < 1e-12);
    }

    #[test]
    fn thermal_peak_matches_closed_form() {
        // 4 kB T Q_eff^2 / (Q_nat w_m k_total) at the trap
        let (cfg, d) = canonical();
        let s = thermal_displacement_psd_at(&d, cfg.environment.temperature, d.trapped_frequency);
        assert!(rel(s.sqrt(), 1.6381023912339925e-14) < 1e-9, "asd {:e}", s.sqrt());

        // same point with the quality ceiling at a round 1e8
        let mut d1e8 = d;
        d1e8.natural_quality_at_trap = 1e8;
        let s = thermal_displacement_psd_at(&d1e8, 300.0, d.trapped_frequency);
        assert!(rel(s.sqrt(), 1.6482246444578907e-14) < 1e-9, "asd {:e}", s.sqrt());
    }

    #[test]
    fn zero_loss_angle_means_zero_thermal_psd() {
        let (cfg, mut d) = canonical();
        d.natural_quality_at_trap = f64::INFINITY;
        let grid = FrequencyGrid::log_spaced(10.0, 1e4, 64).unwrap();
        let psd = suspension_thermal_psd(&d, &cfg.environment, &grid).unwrap();
        assert!(psd.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn thermal_slope_below_resonance_is_minus_half() {
        let (cfg, d) = canonical();
        let grid = FrequencyGrid::log_spaced(10.0, 30.0, 48).unwrap();
        let psd = suspension_thermal_psd(&d, &cfg.environment, &grid).unwrap();
        let slope = log_log_slope(grid.frequencies(), &psd.asd());
        assert!((slope + 0.5).abs() < 0.02, "slope {slope}");
    }

    pub(super) fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let (lx, ly): (Vec<f64>, Vec<f64>) =
            x.iter().zip(y).map(|(a, b)| (a.ln(), b.ln())).unzip();
        let mx = lx.iter().sum::<f64>() / n;
        let my = ly.iter().sum::<f64>() / n;
        let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
        sxy / sxx
    }

    #[test]
    fn default_budget_totals_the_peak_sensitivity() {
        let (cfg, d) = canonical();
        let asd = total_asd_at(&cfg, &d, d.trapped_frequency);
        assert!(rel(asd, 3.0e-14) < 0.01, "peak asd {asd:e}");
        // thermal + frequency alone is also ~3e-14 (floor is small)
        let tf = thermal_displacement_psd_at(&d, 300.0, d.trapped_frequency)
            + frequency_noise_psd_at(cfg.noise.laser_frequency_asd, &cfg.cavity, &d, d.trapped_frequency);
        assert!(rel(tf.sqrt(), 3.0e-14) < 0.10, "thermal+frequency {:e}", tf.sqrt());
    }

    #[test]
    fn zero_laser_noise_means_zero_frequency_component() {
        let (cfg, d) = canonical();
        let grid = FrequencyGrid::log_spaced(10.0, 1e4, 32).unwrap();
        let laser = laser_fractional_psd(0.0, &cfg.cavity, &grid).unwrap();
        let psd = frequency_noise_psd(&laser, &cfg.cavity, &d, &grid).unwrap();
        assert!(psd.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn frequency_component_is_a_linear_filter() {
        // x10 input ASD -> x100 output PSD at every grid point
        let (cfg, d) = canonical();
        let grid = FrequencyGrid::log_spaced(10.0, 1e4, 64).unwrap();
        let a = laser_fractional_psd(0.1, &cfg.cavity, &grid).unwrap();
        let b = laser_fractional_psd(1.0, &cfg.cavity, &grid).unwrap();
        let pa = frequency_noise_psd(&a, &cfg.cavity, &d, &grid).unwrap();
        let pb = frequency_noise_psd(&b, &cfg.cavity, &d, &grid).unwrap();
        for (va, vb) in pa.values().iter().zip(pb.values()) {
            assert!(rel(vb / va, 100.0) < 1e-9);
        }
    }

    #[test]
    fn frequency_noise_rejects_grid_mismatch() {
        let (cfg, d) = canonical();
        let g1 = FrequencyGrid::log_spaced(10.0, 1e4, 32).unwrap();
        let g2 = FrequencyGrid::log_spaced(10.0, 1e4, 33).unwrap();
        let laser = laser_fractional_psd(0.26, &cfg.cavity, &g1).unwrap();
        assert!(matches!(
            frequency_noise_psd(&laser, &cfg.cavity, &d, &g2),
            Err(Error::GridMismatch)
        ));
    }

    #[test]
    fn intensity_floor_is_flat() {
        let grid = FrequencyGrid::log_spaced(10.0, 1e5, 16).unwrap();
        let psd = intensity_noise_floor(1e-14, &grid).unwrap();
        assert!(psd.values().iter().all(|&v| rel(v, 1e-28) < 1e-12));
        let zero = intensity_noise_floor(0.0, &grid).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
        // floor-only budget is flat in ASD
        let b = total_budget(vec![("intensity".into(), psd)]).unwrap();
        let asd = b.total().asd();
        assert!(asd.iter().all(|&a| rel(a, 1e-14) < 1e-12));
    }

    #[test]
    fn gas_damping_is_a_few_nanohertz_at_canonical_pressure() {
        let (cfg, d) = canonical();
        let gamma = gas_damping_rate_hz(&cfg.environment, &cfg.pendulum);
        assert!(
            (1e-9..1e-8).contains(&gamma),
            "gamma {gamma:e} Hz outside the expected order of magnitude"
        );
        let q = gas_damping_limit(&cfg.environment, &cfg.pendulum, d.trapped_frequency);
        assert!(q > 1e10 && q.is_finite(), "limit {q:e}");

        // zero pressure -> unlimited
        let vac = EnvironmentConfig { temperature: 300.0, pressure: 0.0 };
        assert!(gas_damping_limit(&vac, &cfg.pendulum, 280.0).is_infinite());

        // linear kinetic damping: doubling P halves the limit
        let double = EnvironmentConfig { temperature: 300.0, pressure: 2e-5 };
        let q2 = gas_damping_limit(&double, &cfg.pendulum, d.trapped_frequency);
        assert!(rel(q / q2, 2.0) < 1e-12);
    }

    #[test]
    fn totals_add_pointwise() {
        let (cfg, d) = canonical();
        let grid = FrequencyGrid::log_spaced(10.0, 1e5, 128).unwrap();
        let b = default_budget(&cfg, &d, &grid).unwrap();
        for i in 0..grid.len() {
            let s: f64 = b.components().iter().map(|(_, p)| p.values()[i]).sum();
            assert!(rel(b.total().values()[i], s) < 1e-12);
        }
        // single component: total equals it
        let one = total_budget(vec![(
            "thermal".into(),
            b.component("thermal").unwrap().clone(),
        )])
        .unwrap();
        assert_eq!(one.total().values(), one.components()[0].1.values());
        // two equal components double the PSD
        let t = b.component("thermal").unwrap().clone();
        let two = total_budget(vec![("a".into(), t.clone()), ("b".into(), t.clone())]).unwrap();
        for (v2, v1) in two.total().values().iter().zip(t.values()) {
            assert!(rel(*v2, 2.0 * v1) < 1e-12);
        }
    }

    #[test]
    fn subset_totals_never_exceed_full_totals() {
        let (cfg, d) = canonical();
        let grid = FrequencyGrid::log_spaced(10.0, 1e5, 64).unwrap();
        let b = default_budget(&cfg, &d, &grid).unwrap();
        let subset = total_budget(vec![
            b.components()[0].clone(),
            b.components()[2].clone(),
        ])
        .unwrap();
        for (s, t) in subset.total().values().iter().zip(b.total().values()) {
            assert!(s <= t);
        }
    }

    #[test]
    fn csv_has_named_columns_and_six_plus_digits() {
        let (cfg, d) = canonical();
        let grid = FrequencyGrid::log_spaced(10.0, 1e5, 8).unwrap();
        let b = default_budget(&cfg, &d, &grid).unwrap();
        let csv = b.to_csv();
        let header = csv.lines().next().unwrap();
        assert_eq!(
            header,
            "frequency_hz,thermal_asd_m_rthz,frequency_asd_m_rthz,intensity_asd_m_rthz,total_asd_m_rthz"
        );
        assert_eq!(csv.lines().count(), 9);
        let first = csv.lines().nth(1).unwrap();
        assert!(first.split(',').all(|v| v.contains('e') && v.len() >= 8), "{first}");
    }

    #[test]
    fn interpolation_hits_nodes_exactly_and_errors_outside() {
        let grid = FrequencyGrid::new(vec![10.0, 100.0, 1000.0]).unwrap();
        let psd = Psd::new(grid, vec![1e-2, 1e-4, 1e-6], PsdKind::Displacement).unwrap();
        assert_eq!(psd.value_at(100.0).unwrap(), 1e-4);
        // log-log interpolation of a power law is exact
        assert!(rel(psd.value_at(31.622776601683793).unwrap(), 1e-3) < 1e-12);
        assert!(matches!(psd.value_at(5.0), Err(Error::BandNotCovered { .. })));
        assert!(matches!(psd.value_at(2000.0), Err(Error::BandNotCovered { .. })));
    }

    #[test]
    fn cold_damping_peak_area_tracks_the_mode_temperature() {
        // Convention under test: the feedback-cooled mode temperature is
        // T_fb = T * Q_eff / Q_nat, so the thermal peak area divided by
        // Q_eff is invariant when only the feedback gain changes.
        let (cfg, d) = canonical();
        let area = |q_eff: f64| {
            let mut dd = d;
            dd.effective_quality = q_eff;
            let fm = d.trapped_frequency;
            let n = 60_000;
            let lo = fm - 56.0;
            let step = 112.0 / n as f64;
            let mut acc = 0.0;
            for i in 0..=n {
                let f = lo + step * i as f64;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                acc += w * thermal_displacement_psd_at(&dd, cfg.environment.temperature, f);
            }
            acc * step
        };
        let r = (area(250.0) / 250.0) / (area(2500.0) / 2500.0);
        assert!((r - 1.0).abs() < 0.05, "area-per-Q ratio {r}");
    }

    #[test]
    fn viscous_thermal_psd_integrates_to_equipartition() {
        // Independent quadrature oracle: integrating m w^2 S_x df with the
        // viscous model and a single Q recovers kB T within 2%.
        let (cfg, d) = canonical();
        let m = d.probe_mass();
        let fm = d.trapped_frequency;
        let wm = std::f64::consts::TAU * fm;
        let q = 250.0;
        let grid = FrequencyGrid::log_spaced(fm / 1e3, fm * 1e3, 120_000).unwrap();
        let xs = grid.frequencies();
        let mut integral = 0.0;
        let sx = |f: f64| {
            let chi = model::susceptibility(fm, m, q, DampingModel::Viscous, f);
            4.0 * BOLTZMANN_CONSTANT * cfg.environment.temperature * m * wm / q * chi.norm_sqr()
        };
        for w in xs.windows(2) {
            let (f0, f1) = (w[0], w[1]);
            let g0 = m * (std::f64::consts::TAU * f0).powi(2) * sx(f0);
            let g1 = m * (std::f64::consts::TAU * f1).powi(2) * sx(f1);
            integral += 0.5 * (g0 + g1) * (f1 - f0);
        }
        let kbt = BOLTZMANN_CONSTANT * cfg.environment.temperature;
        assert!(rel(integral, kbt) < 0.02, "integral/kBT = {}", integral / kbt);
    }

    #[test]
    fn budget_grid_samples_the_peak() {
        let g = budget_grid((10.0, 1e5), 600, 280.0).unwrap();
        let near = g
            .frequencies()
            .iter()
            .filter(|f| (**f - 280.0).abs() < 0.2)
            .count();
        assert!(near >= 2, "only {near} points within 0.2 Hz of the peak");
    }
}
