//! Recovering physics from records: Welch PSD estimation, calibration,
//! resonance-peak fitting, lock-in demodulation, and ringdown analysis.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::budget::{FrequencyGrid, Psd, PsdKind};
use crate::error::{Error, Result};
use crate::model::DampingModel;
use crate::optimize::nelder_mead_min;
use crate::parallel;
use crate::timeseries::{TimeSeries, Unit};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    Hann,
    Rectangular,
}

/// Welch estimator settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchConfig {
    /// Samples per segment; the resolution bandwidth is `rate / segment_length`.
    pub segment_length: usize,
    /// Fraction of a segment shared with its neighbor, `[0, 1)`.
    pub overlap_fraction: f64,
    pub window: WindowKind,
    /// Subtract each segment's mean before transforming.
    pub detrend: bool,
}

impl WelchConfig {
    /// Hann window with 50% overlap, no detrending.
    pub fn new(segment_length: usize) -> Result<Self> {
        let cfg = Self {
            segment_length,
            overlap_fraction: 0.5,
            window: WindowKind::Hann,
            detrend: false,
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        if self.segment_length < 8 {
            return Err(Error::Invariant {
                field: "segment_length",
                msg: format!("must be >= 8, got {}", self.segment_length),
            });
        }
        if !(0.0..1.0).contains(&self.overlap_fraction) {
            return Err(Error::Invariant {
                field: "overlap_fraction",
                msg: format!("must be in [0, 1), got {}", self.overlap_fraction),
            });
        }
        Ok(())
    }
}

/// A Welch PSD with its resolution bandwidth and averaging count.
#[derive(Debug, Clone)]
pub struct WelchEstimate {
    pub psd: Psd,
    /// `sample_rate / segment_length`, Hz.
    pub resolution_bandwidth: f64,
    /// Number of averaged segments.
    pub segments: usize,
}

fn window_values(kind: WindowKind, n: usize) -> Vec<f64> {
    match kind {
        WindowKind::Rectangular => vec![1.0; n],
        WindowKind::Hann => (0..n)
            .map(|i| 0.5 * (1.0 - (TAU * i as f64 / n as f64).cos()))
            .collect(),
    }
}

/// One-sided periodogram of one windowed block: `2 |X_k|^2 / (fs sum w^2)`
/// for interior bins (factor 1 at DC and Nyquist). Output has
/// `n/2 + 1` bins at spacing `fs/n`.
fn periodogram(
    block: &[f64],
    window: &[f64],
    fs: f64,
    fft: &Arc<dyn rustfft::Fft<f64>>,
    detrend: bool,
) -> Vec<f64> {
    let n = block.len();
    let mean = if detrend { block.iter().sum::<f64>() / n as f64 } else { 0.0 };
    let mut buf: Vec<Complex64> = block
        .iter()
        .zip(window)
        .map(|(x, w)| Complex64::new((x - mean) * w, 0.0))
        .collect();
    fft.process(&mut buf);
    let wpow: f64 = window.iter().map(|w| w * w).sum();
    let norm = 1.0 / (fs * wpow);
    let nbins = n / 2 + 1;
    (0..nbins)
        .map(|k| {
            let two_sided = buf[k].norm_sqr() * norm;
            if k == 0 || (n.is_multiple_of(2) && k == n / 2) {
                two_sided
            } else {
                2.0 * two_sided
            }
        })
        .collect()
}

/// Welch PSD of a displacement record, m^2/Hz, normalized so a pure tone of
/// amplitude `A` integrates to `A^2/2` across its bins.
pub fn welch_psd(series: &TimeSeries, cfg: &WelchConfig) -> Result<WelchEstimate> {
    cfg.check()?;
    if series.unit != Unit::Meters {
        return Err(Error::WrongUnit { expected: "meters" });
    }
    let n = series.values.len();
    let seg = cfg.segment_length;
    if n < seg {
        return Err(Error::RecordTooShort { len: n, needed: seg });
    }
    let overlap = (seg as f64 * cfg.overlap_fraction) as usize;
    let step = (seg - overlap).max(1);
    let n_segments = (n - seg) / step + 1;

    let window = window_values(cfg.window, seg);
    let fft = FftPlanner::new().plan_fft_forward(seg);
    let values = &series.values;
    let fs = series.sample_rate;
    let detrend = cfg.detrend;
    let per: Vec<Vec<f64>> = parallel::map_index(n_segments, |s| {
        periodogram(&values[s * step..s * step + seg], &window, fs, &fft, detrend)
    });

    let nbins = seg / 2 + 1;
    let mut mean = vec![0.0; nbins];
    for p in &per {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n_segments as f64;
    }

    // drop the DC bin; grids are strictly positive
    let df = fs / seg as f64;
    let freqs: Vec<f64> = (1..nbins).map(|k| k as f64 * df).collect();
    let psd = Psd::new(FrequencyGrid::new(freqs)?, mean[1..].to_vec(), PsdKind::Displacement)?;
    Ok(WelchEstimate { psd, resolution_bandwidth: df, segments: n_segments })
}

/// Convert a recorded-volts series to displacement through its calibration
/// metadata.
pub fn calibrate(series: &TimeSeries) -> Result<TimeSeries> {
    if series.unit != Unit::Volts {
        return Err(Error::WrongUnit { expected: "volts" });
    }
    let cal = series.calibration.ok_or(Error::MissingCalibration)?;
    if !cal.is_finite() || cal <= 0.0 {
        return Err(Error::BadCalibration(cal));
    }
    Ok(TimeSeries {
        sample_rate: series.sample_rate,
        values: series.values.iter().map(|v| v * cal).collect(),
        unit: Unit::Meters,
        calibration: None,
        seed: series.seed,
    })
}

/// Fitted resonance parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakFit {
    /// Fitted resonance, Hz.
    pub center_frequency: f64,
    pub quality: f64,
    /// Model ASD at the fitted center (peak plus floor), m/sqrt(Hz).
    pub peak_asd: f64,
    /// RMS of log-residuals over the fitted band (relative misfit for
    /// small residuals).
    pub residual_norm: f64,
}

fn peak_model(model: DampingModel, fm: f64, q: f64, a: f64, floor: f64, f: f64) -> f64 {
    let det = (fm * fm - f * f).powi(2);
    match model {
        DampingModel::Viscous => a / (det + (fm * f / q).powi(2)) + floor,
        DampingModel::Structural => a / (f * (det + (fm * fm / q).powi(2))) + floor,
    }
}

/// Least-squares fit of a `|chi|^2`-shaped peak plus a flat floor over a
/// band of a PSD. The fit runs on log-PSD, which keeps it scale-equivariant:
/// scaling the input by `c` scales `peak_asd` by `sqrt(c)` and leaves the
/// center and quality unchanged.
pub fn fit_resonance(psd: &Psd, band: (f64, f64), model: DampingModel) -> Result<PeakFit> {
    let (lo, hi) = band;
    let pairs: Vec<(f64, f64)> = psd
        .grid()
        .frequencies()
        .iter()
        .zip(psd.values())
        .filter(|(f, _)| **f >= lo && **f <= hi)
        .map(|(f, v)| (*f, *v))
        .collect();
    if pairs.len() < 8 {
        return Err(Error::NoPeak);
    }
    let (peak_idx, &(f_peak, v_peak)) = pairs
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.partial_cmp(&b.1 .1).unwrap())
        .unwrap();
    if peak_idx == 0 || peak_idx == pairs.len() - 1 {
        return Err(Error::NoPeak);
    }
    let mut sorted: Vec<f64> = pairs.iter().map(|(_, v)| *v).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[sorted.len() / 2];
    let quartile = sorted[sorted.len() / 4];
    if v_peak <= 3.0 * median || v_peak <= 0.0 {
        return Err(Error::NoPeak);
    }

    // half-power width around the peak for the initial quality factor
    let half = quartile + (v_peak - quartile) / 2.0;
    let mut f_left = lo;
    for i in (0..peak_idx).rev() {
        if pairs[i].1 < half {
            f_left = pairs[i].0;
            break;
        }
    }
    let mut f_right = hi;
    for p in pairs.iter().skip(peak_idx + 1) {
        if p.1 < half {
            f_right = p.0;
            break;
        }
    }
    let width = (f_right - f_left).max(f_peak * 1e-7);
    let q0 = (f_peak / width).clamp(3.0, 1e8);
    let floor0 = quartile.max(v_peak * 1e-15);
    let a0 = match model {
        DampingModel::Viscous => (v_peak - floor0).max(v_peak * 0.1) * f_peak.powi(4) / (q0 * q0),
        DampingModel::Structural => {
            (v_peak - floor0).max(v_peak * 0.1) * f_peak.powi(5) / (q0 * q0)
        }
    };

    let tiny = v_peak * 1e-300;
    let data: Vec<(f64, f64)> = pairs.iter().map(|(f, v)| (*f, v.max(tiny).ln())).collect();
    let sse = |z: &[f64]| -> f64 {
        let (fm, q, a, floor) = (z[0].exp(), z[1].exp(), z[2].exp(), z[3].exp());
        data.iter()
            .map(|(f, lv)| {
                let m = peak_model(model, fm, q, a, floor, *f).max(tiny).ln();
                (m - lv) * (m - lv)
            })
            .sum()
    };

    let zlo = [lo.ln(), 1.0f64.ln(), a0.ln() - 30.0, floor0.ln() - 20.0];
    let zhi = [hi.ln(), 1e10f64.ln(), a0.ln() + 30.0, (v_peak * 10.0).ln()];
    let z0 = [f_peak.ln(), q0.ln(), a0.ln(), floor0.ln()];
    let step = [0.01, 0.5, 0.5, 0.5];
    let (z1, _, _) = nelder_mead_min(sse, &z0, &step, &zlo, &zhi, 3000);
    // one restart with tighter steps polishes the corner cases
    let step2 = [1e-4, 0.05, 0.05, 0.05];
    let (z, best, _) = nelder_mead_min(sse, &z1, &step2, &zlo, &zhi, 2000);
    if !best.is_finite() {
        return Err(Error::NoConvergence(format!(
            "objective {best:e} after refinement from f={f_peak} Hz, Q0={q0}"
        )));
    }
    let (fm, q, a, floor) = (z[0].exp(), z[1].exp(), z[2].exp(), z[3].exp());
    Ok(PeakFit {
        center_frequency: fm,
        quality: q,
        peak_asd: peak_model(model, fm, q, a, floor, fm).sqrt(),
        residual_norm: (best / data.len() as f64).sqrt(),
    })
}

/// Coherent I/Q estimate of a tone at a known reference frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LockinResult {
    /// In-phase amplitude, m.
    pub in_phase: f64,
    /// Quadrature amplitude, m.
    pub quadrature: f64,
    /// `sqrt(I^2 + Q^2)`, m.
    pub amplitude: f64,
    /// Phase of the tone relative to the reference cosine, rad.
    pub phase: f64,
    /// One-sigma statistical amplitude uncertainty `sqrt(S_x(f_ref)/T)`, m,
    /// with `S_x` estimated from the record's off-tone spectrum.
    pub statistical_sigma: f64,
}

fn demodulate(values: &[f64], rate: f64, f_ref: f64) -> (f64, f64) {
    let n = values.len();
    let mut acc_i = 0.0;
    let mut acc_q = 0.0;
    for (j, x) in values.iter().enumerate() {
        let arg = TAU * f_ref * j as f64 / rate;
        acc_i += x * arg.cos();
        acc_q += x * arg.sin();
    }
    (2.0 * acc_i / n as f64, 2.0 * acc_q / n as f64)
}

/// Lock-in demodulation at `reference_frequency` over the first
/// `integration_time` seconds (truncated to an integer number of reference
/// cycles).
///
/// The statistical sigma is estimated from the whole record: the fitted
/// tone is subtracted, and the residual's Hann periodogram is averaged over
/// the bins within three resolution bandwidths of the reference. That keeps
/// the estimate on the (possibly peaked) local noise spectrum instead of
/// the skirts further away.
pub fn lockin(
    series: &TimeSeries,
    reference_frequency: f64,
    integration_time: f64,
) -> Result<LockinResult> {
    if series.unit != Unit::Meters {
        return Err(Error::WrongUnit { expected: "meters" });
    }
    let rate = series.sample_rate;
    let n = series.values.len();
    let duration = n as f64 / rate;
    if integration_time > duration * (1.0 + 1e-12) {
        return Err(Error::RecordTooShort {
            len: n,
            needed: (integration_time * rate).ceil() as usize,
        });
    }
    let cycles = (reference_frequency * integration_time).floor();
    if cycles < 10.0 {
        return Err(Error::TooFewCycles { cycles });
    }
    let t_span = cycles / reference_frequency;
    let n_used = ((t_span * rate).round() as usize).min(n).max(1);
    let (i_demod, q_demod) = demodulate(&series.values[..n_used], rate, reference_frequency);
    let amplitude = i_demod.hypot(q_demod);
    let phase = (-q_demod).atan2(i_demod);

    // off-tone noise PSD at the reference, from the tone-subtracted record
    let full_cycles = (reference_frequency * duration).floor();
    let n_full = ((full_cycles / reference_frequency * rate).round() as usize).min(n).max(1);
    let (i_full, q_full) = demodulate(&series.values[..n_full], rate, reference_frequency);
    let residual: Vec<f64> = series
        .values
        .iter()
        .enumerate()
        .map(|(j, x)| {
            let arg = TAU * reference_frequency * j as f64 / rate;
            x - i_full * arg.cos() - q_full * arg.sin()
        })
        .collect();
    let window = window_values(WindowKind::Hann, n);
    let fft = FftPlanner::new().plan_fft_forward(n);
    let pgram = periodogram(&residual, &window, rate, &fft, false);
    let k0 = (reference_frequency * n as f64 / rate).round() as usize;
    let k_lo = k0.saturating_sub(3).max(1);
    let k_hi = (k0 + 3).min(pgram.len() - 1);
    let s_local =
        pgram[k_lo..=k_hi].iter().sum::<f64>() / (k_hi - k_lo + 1) as f64;
    let t_used = n_used as f64 / rate;
    Ok(LockinResult {
        in_phase: i_demod,
        quadrature: q_demod,
        amplitude,
        phase,
        statistical_sigma: (s_local / t_used).sqrt(),
    })
}

/// Quality factor from the decay of a resonant tone: exponential fit to the
/// demodulated envelope and `Q = pi f tau`.
pub fn ringdown_quality(series: &TimeSeries, resonance_hz: f64) -> Result<f64> {
    let rate = series.sample_rate;
    let n = series.values.len();
    let total_cycles = resonance_hz * n as f64 / rate;
    let cycles_per_window = (total_cycles / 24.0).floor().max(10.0);
    let win = ((cycles_per_window / resonance_hz) * rate).round() as usize;
    if win == 0 || n / win < 4 {
        return Err(Error::RecordTooShort { len: n, needed: 4 * win.max(1) });
    }
    let mut times = Vec::new();
    let mut log_amps = Vec::new();
    let mut peak = 0.0f64;
    let mut start = 0;
    while start + win <= n {
        let (i, q) = demodulate(&series.values[start..start + win], rate, resonance_hz);
        let amp = i.hypot(q);
        peak = peak.max(amp);
        if amp > peak * 1e-9 {
            times.push((start as f64 + win as f64 / 2.0) / rate);
            log_amps.push(amp.ln());
        }
        start += win;
    }
    if times.len() < 4 {
        return Err(Error::NonDecaying);
    }
    let m = times.len() as f64;
    let mt = times.iter().sum::<f64>() / m;
    let ma = log_amps.iter().sum::<f64>() / m;
    let sxy: f64 = times.iter().zip(&log_amps).map(|(t, a)| (t - mt) * (a - ma)).sum();
    let sxx: f64 = times.iter().map(|t| (t - mt) * (t - mt)).sum();
    let slope = sxy / sxx;
    let span = times.last().unwrap() - times[0];
    if slope.is_nan() || slope >= 0.0 || -slope * span < 0.2 {
        return Err(Error::NonDecaying);
    }
    let tau = -1.0 / slope;
    Ok(std::f64::consts::PI * resonance_hz * tau)
}
