//! Detector-record synthesis: colored noise realized from a budget PSD,
//! gravitational tone injection, conversion to recorded volts, and the
//! record file formats.
//!
//! Noise synthesis draws independent Gaussian spectral amplitudes per
//! frequency bin, Hermitian-symmetrized, and inverse-Fourier-transforms
//! them. Each bin's draw is keyed by (record seed, bin index), so records
//! are byte-identical for a given seed regardless of how the bins are
//! scheduled across threads.

use std::f64::consts::TAU;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;

use crate::budget::{self, Psd};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::gravity;
use crate::model::DerivedOscillator;
use crate::parallel;

/// Sample unit of a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Meters,
    Volts,
}

/// Uniformly sampled record with calibration and generation provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    /// Sample rate, Hz.
    pub sample_rate: f64,
    pub values: Vec<f64>,
    pub unit: Unit,
    /// Displacement per volt, m/V; present when the record is in volts.
    pub calibration: Option<f64>,
    /// Seed the stochastic content was generated from.
    pub seed: u64,
}

impl TimeSeries {
    /// Record duration, s.
    pub fn duration(&self) -> f64 {
        self.values.len() as f64 / self.sample_rate
    }
}

/// SplitMix64 step; mixes the record seed with a bin index into an
/// independent per-bin stream key.
fn mix_seed(seed: u64, k: u64) -> u64 {
    let mut z = seed ^ k.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Two standard normal draws for bin `k` of record `seed`.
fn bin_normals(seed: u64, k: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, k));
    let g1: f64 = StandardNormal.sample(&mut rng);
    let g2: f64 = StandardNormal.sample(&mut rng);
    (g1, g2)
}

/// Number of positive non-Nyquist bins of an `n`-sample record.
fn active_bins(n: usize) -> usize {
    (n - 1) / 2
}

/// Realize a record from per-bin one-sided PSD values `psd_at(k)` in
/// m^2/Hz, for bins `k = 1..=active_bins(n)`. DC and Nyquist are zero.
fn synthesize_from_bins<F>(n: usize, sample_rate: f64, seed: u64, psd_at: F) -> Vec<f64>
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let df = sample_rate / n as f64;
    let kmax = active_bins(n);
    // Per-quadrature spectral sigma: E|X_k|^2 = (N^2/2) S_k df so that the
    // unwindowed one-sided periodogram 2|X_k|^2/(fs N) estimates S_k.
    let half_n = n as f64 / 2.0;
    let coeffs: Vec<Complex64> = parallel::map_index(kmax, |i| {
        let k = i + 1;
        let sigma = half_n * (psd_at(k) * df).sqrt();
        let (g1, g2) = bin_normals(seed, k as u64);
        Complex64::new(sigma * g1, sigma * g2)
    });

    let mut spectrum = vec![Complex64::new(0.0, 0.0); n];
    for (i, c) in coeffs.into_iter().enumerate() {
        let k = i + 1;
        spectrum[k] = c;
        spectrum[n - k] = c.conj();
    }
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(n).process(&mut spectrum);
    let scale = 1.0 / n as f64;
    spectrum.into_iter().map(|c| c.re * scale).collect()
}

/// Record length for a duration and rate, validated.
fn record_length(duration_s: f64, sample_rate: f64) -> Result<usize> {
    if !(sample_rate > 0.0 && sample_rate.is_finite()) {
        return Err(Error::Invariant {
            field: "sample_rate_hz",
            msg: format!("must be > 0, got {sample_rate:e}"),
        });
    }
    let n = (duration_s * sample_rate).round();
    if !(n >= 2.0 && n.is_finite()) {
        return Err(Error::Invariant {
            field: "duration_s",
            msg: format!("record needs at least 2 samples, got {n}"),
        });
    }
    Ok(n as usize)
}

/// Stationary Gaussian record whose one-sided PSD matches `psd`
/// (interpolated onto the record's frequency bins) in expectation.
/// Deterministic given `seed`.
pub fn synthesize_colored_noise(
    psd: &Psd,
    duration_s: f64,
    sample_rate: f64,
    seed: u64,
) -> Result<TimeSeries> {
    let n = record_length(duration_s, sample_rate)?;
    let df = sample_rate / n as f64;
    let kmax = active_bins(n);
    let need_lo = df;
    let need_hi = kmax as f64 * df;
    if psd.grid().min() > need_lo || psd.grid().max() < need_hi {
        return Err(Error::BandNotCovered {
            need_lo,
            need_hi,
            have_lo: psd.grid().min(),
            have_hi: psd.grid().max(),
        });
    }
    // Pre-interpolate so the hot loop only indexes.
    let values: Vec<f64> = parallel::map_index(kmax, |i| {
        psd.value_at((i + 1) as f64 * df).expect("coverage checked above")
    });
    let samples = synthesize_from_bins(n, sample_rate, seed, |k| values[k - 1]);
    Ok(TimeSeries { sample_rate, values: samples, unit: Unit::Meters, calibration: None, seed })
}

/// Add `amplitude * cos(2 pi f t + phase)` to every sample.
pub fn inject_tone(
    mut series: TimeSeries,
    amplitude_m: f64,
    frequency_hz: f64,
    phase_rad: f64,
) -> Result<TimeSeries> {
    let nyquist = series.sample_rate / 2.0;
    if frequency_hz >= nyquist {
        return Err(Error::Aliasing { frequency: frequency_hz, nyquist });
    }
    if amplitude_m != 0.0 {
        let rate = series.sample_rate;
        for (i, v) in series.values.iter_mut().enumerate() {
            let t = i as f64 / rate;
            *v += amplitude_m * (TAU * frequency_hz * t + phase_rad).cos();
        }
    }
    Ok(series)
}

/// Convert a displacement record to recorded volts through the
/// voltage-to-displacement conversion factor.
pub fn to_volts(series: &TimeSeries, calibration_m_per_v: f64) -> Result<TimeSeries> {
    if series.unit != Unit::Meters {
        return Err(Error::WrongUnit { expected: "meters" });
    }
    if !calibration_m_per_v.is_finite() || calibration_m_per_v <= 0.0 {
        return Err(Error::BadCalibration(calibration_m_per_v));
    }
    Ok(TimeSeries {
        sample_rate: series.sample_rate,
        values: series.values.iter().map(|v| v / calibration_m_per_v).collect(),
        unit: Unit::Volts,
        calibration: Some(calibration_m_per_v),
        seed: series.seed,
    })
}

/// Everything the end-to-end simulation derived while producing a record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationReport {
    pub derived: DerivedOscillator,
    /// Injected coherent amplitude (exact drive fundamental through the
    /// susceptibility), m.
    pub tone_amplitude: f64,
    /// Drive frequency, Hz.
    pub tone_frequency: f64,
    /// Total budget ASD at the drive frequency, m/sqrt(Hz).
    pub noise_asd_at_tone: f64,
}

/// A synthesized record in volts plus its derivation report.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub series: TimeSeries,
    pub report: SimulationReport,
}

/// End-to-end record synthesis: budget noise plus the gravitational tone,
/// rendered in recorded volts. Byte-deterministic given
/// `(config, duration, rate, seed)`.
pub fn simulate_experiment(
    cfg: &SystemConfig,
    duration_s: f64,
    sample_rate: f64,
    seed: u64,
) -> Result<Simulation> {
    cfg.validate()?;
    let derived = cfg.derive()?;
    let n = record_length(duration_s, sample_rate)?;
    let df = sample_rate / n as f64;
    let config = *cfg;
    // The analytic budget is evaluated exactly at each record bin; no
    // interpolation error enters the synthesis.
    let samples = synthesize_from_bins(n, sample_rate, seed, move |k| {
        budget::total_psd_at(&config, &derived, k as f64 * df)
    });
    let noise = TimeSeries {
        sample_rate,
        values: samples,
        unit: Unit::Meters,
        calibration: None,
        seed,
    };

    let drive = gravity::exact_force_harmonics(&cfg.source, cfg.pendulum.probe_mass, 8)?;
    let tone_frequency = cfg.source.drive_frequency;
    let tone_amplitude =
        gravity::driven_response(&drive, &derived, derived.effective_quality, tone_frequency);
    let with_tone = inject_tone(noise, tone_amplitude, tone_frequency, 0.0)?;
    let series = to_volts(&with_tone, cfg.cavity.calibration)?;
    Ok(Simulation {
        series,
        report: SimulationReport {
            derived,
            tone_amplitude,
            tone_frequency,
            noise_asd_at_tone: budget::total_asd_at(cfg, &derived, tone_frequency),
        },
    })
}

// --- record file format ----------------------------------------------------

const MAGIC: &[u8; 5] = b"GSIM1";

fn unit_code(unit: Unit) -> u8 {
    match unit {
        Unit::Meters => 0,
        Unit::Volts => 1,
    }
}

/// Write a record in the binary format: magic `GSIM1`, then little-endian
/// sample_rate (f64), length (u64), unit code (u8: 0=m, 1=V), calibration
/// (f64, 0 when absent), seed (u64), and the samples as consecutive f64.
pub fn write_record_to<W: Write>(mut w: W, series: &TimeSeries) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&series.sample_rate.to_le_bytes())?;
    w.write_all(&(series.values.len() as u64).to_le_bytes())?;
    w.write_all(&[unit_code(series.unit)])?;
    w.write_all(&series.calibration.unwrap_or(0.0).to_le_bytes())?;
    w.write_all(&series.seed.to_le_bytes())?;
    let mut buf = Vec::with_capacity(series.values.len() * 8);
    for v in &series.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn write_record(path: &Path, series: &TimeSeries) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_record_to(std::io::BufWriter::new(file), series)
}

pub fn read_record_from<R: Read>(mut r: R) -> Result<TimeSeries> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::BadRecordFile("bad magic".into()));
    }
    let mut f8 = [0u8; 8];
    r.read_exact(&mut f8)?;
    let sample_rate = f64::from_le_bytes(f8);
    r.read_exact(&mut f8)?;
    let length = u64::from_le_bytes(f8) as usize;
    let mut u1 = [0u8; 1];
    r.read_exact(&mut u1)?;
    let unit = match u1[0] {
        0 => Unit::Meters,
        1 => Unit::Volts,
        c => return Err(Error::BadRecordFile(format!("unknown unit code {c}"))),
    };
    r.read_exact(&mut f8)?;
    let calibration = f64::from_le_bytes(f8);
    r.read_exact(&mut f8)?;
    let seed = u64::from_le_bytes(f8);
    if !sample_rate.is_finite() || sample_rate <= 0.0 || length == 0 {
        return Err(Error::BadRecordFile(format!(
            "invalid header: rate {sample_rate:e}, length {length}"
        )));
    }
    let mut buf = vec![0u8; length * 8];
    r.read_exact(&mut buf)?;
    let values = buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(TimeSeries {
        sample_rate,
        values,
        unit,
        calibration: if calibration > 0.0 { Some(calibration) } else { None },
        seed,
    })
}

pub fn read_record(path: &Path) -> Result<TimeSeries> {
    let file = std::fs::File::open(path)?;
    read_record_from(std::io::BufReader::new(file))
}

/// CSV export of a record: `time_s,value`, one row per sample.
pub fn write_record_csv<W: Write>(mut w: W, series: &TimeSeries) -> Result<()> {
    writeln!(w, "time_s,value")?;
    for (i, v) in series.values.iter().enumerate() {
        writeln!(w, "{:.9e},{:.9e}", i as f64 / series.sample_rate, v)?;
    }
    Ok(())
}
