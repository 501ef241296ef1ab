//! Command-line interface: `budget`, `gravity`, `simulate`, `analyze`,
//! `optimize`. All numeric text output carries at least seven significant
//! digits, and every emitted file is byte-deterministic given the config,
//! seed, and subcommand.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::budget;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::gravity;
use crate::model::DampingModel;
use crate::optimize::{self, Parameter, Scale, SearchSpace};
use crate::spectral::{self, WelchConfig};
use crate::timeseries::{self, Unit};

#[derive(Debug, Parser)]
#[command(
    name = "milligrav",
    about = "Noise budget, simulation, and signal recovery for a mg-scale optically trapped pendulum gravimeter",
    version
)]
pub struct Cli {
    /// Config file (`section.key = value` lines); omit for built-in defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

fn parse_band(s: &str) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected `lo,hi`")?;
    let lo: f64 = lo.trim().parse().map_err(|_| format!("bad low edge `{lo}`"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("bad high edge `{hi}`"))?;
    if !(lo > 0.0 && hi > lo) {
        return Err(format!("need 0 < lo < hi, got {lo},{hi}"));
    }
    Ok((lo, hi))
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the displacement-noise budget and export it as CSV.
    Budget {
        /// Frequency band `lo,hi` in Hz.
        #[arg(long, value_parser = parse_band, default_value = "10,100000")]
        band: (f64, f64),
        /// Log-spaced grid points over the band (the trapped resonance is
        /// refined on top of these).
        #[arg(long, default_value_t = 600)]
        points: usize,
        /// Output CSV path.
        #[arg(long, default_value = "budget.csv")]
        out: PathBuf,
    },
    /// Print the gravitational signal table.
    Gravity {
        /// Integration time for the SNR line, s.
        #[arg(long = "integration-time-s", default_value_t = 1.0)]
        integration_time_s: f64,
    },
    /// Synthesize a detector record (budget noise plus gravity tone) in volts.
    Simulate {
        #[arg(long = "duration-s", default_value_t = 10.0)]
        duration_s: f64,
        #[arg(long = "sample-rate-hz", default_value_t = 1e6)]
        sample_rate_hz: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output record path (binary format).
        #[arg(long, default_value = "record.bin")]
        out: PathBuf,
        /// Also export the record as `time_s,value` CSV.
        #[arg(long = "csv-out")]
        csv_out: Option<PathBuf>,
    },
    /// Estimate the ASD of a record, optionally fit the resonance, and run
    /// the lock-in at the drive frequency.
    Analyze {
        /// Record file produced by `simulate`.
        record: PathBuf,
        /// Welch segment length in samples; defaults to one-second segments.
        #[arg(long = "segment-length")]
        segment_length: Option<usize>,
        /// Fit band `lo,hi` in Hz; omit to skip the resonance fit.
        #[arg(long, value_parser = parse_band)]
        band: Option<(f64, f64)>,
        /// Lock-in reference frequency, Hz; defaults to the configured drive.
        #[arg(long = "lockin-frequency-hz")]
        lockin_frequency_hz: Option<f64>,
        /// Lock-in integration time, s.
        #[arg(long = "integration-time-s", default_value_t = 1.0)]
        integration_time_s: f64,
        /// Output ASD CSV path.
        #[arg(long, default_value = "asd.csv")]
        out: PathBuf,
    },
    /// Search experiment parameters for the best analytic SNR (or signal).
    Optimize {
        /// Objective: `snr` (1 s analytic SNR) or `displacement` (resonant
        /// closed-form signal).
        #[arg(long, default_value = "snr")]
        objective: String,
        /// Free parameter as `name,lo,hi[,log]`; repeatable. Names:
        /// trap_frequency_hz, optical_stiffness_npm, effective_quality,
        /// source_mass_kg, mean_separation_m, drive_amplitude_m,
        /// laser_frequency_asd_hz_rthz, intensity_floor_m_rthz.
        #[arg(long = "param", required = true)]
        params: Vec<String>,
        #[arg(long, default_value_t = 2000)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output trace CSV path.
        #[arg(long, default_value = "trace.csv")]
        out: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> Result<SystemConfig> {
    match path {
        None => Ok(SystemConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            SystemConfig::parse(&text)
        }
    }
}

fn parse_param(spec: &str) -> Result<Parameter> {
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    if parts.len() < 3 || parts.len() > 4 {
        return Err(Error::Invariant {
            field: "param",
            msg: format!("expected `name,lo,hi[,log]`, got `{spec}`"),
        });
    }
    if !optimize::OVERRIDE_KEYS.contains(&parts[0]) {
        return Err(Error::Invariant {
            field: "param",
            msg: format!("unknown parameter `{}`", parts[0]),
        });
    }
    let lower: f64 = parts[1].parse().map_err(|_| Error::Invariant {
        field: "param",
        msg: format!("bad lower bound `{}`", parts[1]),
    })?;
    let upper: f64 = parts[2].parse().map_err(|_| Error::Invariant {
        field: "param",
        msg: format!("bad upper bound `{}`", parts[2]),
    })?;
    let scale = match parts.get(3) {
        None => Scale::Linear,
        Some(&"log") => Scale::Logarithmic,
        Some(&"linear") => Scale::Linear,
        Some(other) => {
            return Err(Error::Invariant {
                field: "param",
                msg: format!("unknown scale `{other}`"),
            })
        }
    };
    Ok(Parameter { name: parts[0].to_string(), lower, upper, scale })
}

/// Dispatch a parsed command line. Writes files, prints the report to
/// stdout, and propagates every failure as an error for the caller to turn
/// into a nonzero exit status.
pub fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Budget { band, points, out } => run_budget(&cfg, band, points, &out),
        Command::Gravity { integration_time_s } => run_gravity(&cfg, integration_time_s),
        Command::Simulate { duration_s, sample_rate_hz, seed, out, csv_out } => {
            run_simulate(&cfg, duration_s, sample_rate_hz, seed, &out, csv_out.as_deref())
        }
        Command::Analyze {
            record,
            segment_length,
            band,
            lockin_frequency_hz,
            integration_time_s,
            out,
        } => run_analyze(
            &cfg,
            &record,
            segment_length,
            band,
            lockin_frequency_hz,
            integration_time_s,
            &out,
        ),
        Command::Optimize { objective, params, budget, seed, out } => {
            run_optimize(&cfg, &objective, &params, budget, seed, &out)
        }
    }
}

fn run_budget(cfg: &SystemConfig, band: (f64, f64), points: usize, out: &Path) -> Result<()> {
    let derived = cfg.derive()?;
    let grid = budget::budget_grid(band, points, derived.trapped_frequency)?;
    let nb = budget::default_budget(cfg, &derived, &grid)?;
    std::fs::write(out, nb.to_csv())?;

    let fm = derived.trapped_frequency;
    println!("budget_csv = {}", out.display());
    println!("grid_points = {}", grid.len());
    println!("trap_frequency_hz = {fm:.6e}");
    println!("natural_quality_at_trap = {:.6e}", derived.natural_quality_at_trap);
    println!("effective_quality = {:.6e}", derived.effective_quality);
    println!("effective_temperature_k = {:.6e}", derived.effective_temperature);
    println!("qf_product_hz = {:.6e}", derived.qf_product);
    println!("total_asd_at_trap_m_rthz = {:.6e}", budget::total_asd_at(cfg, &derived, fm));
    let gamma = budget::gas_damping_rate_hz(&cfg.environment, &cfg.pendulum);
    println!("gas_damping_rate_hz = {gamma:.6e}");
    println!(
        "gas_quality_limit = {:.6e}",
        budget::gas_damping_limit(&cfg.environment, &cfg.pendulum, fm)
    );
    Ok(())
}

fn run_gravity(cfg: &SystemConfig, integration_time_s: f64) -> Result<()> {
    let derived = cfg.derive()?;
    let fm = derived.trapped_frequency;
    let q = derived.effective_quality;
    let closed_form = gravity::resonant_rms_displacement(&cfg.source, q, fm);
    let drive = gravity::exact_force_harmonics(&cfg.source, cfg.pendulum.probe_mass, 8)?;
    let exact = gravity::driven_response(&drive, &derived, q, cfg.source.drive_frequency);
    let noise = budget::total_asd_at(cfg, &derived, cfg.source.drive_frequency);
    let est = gravity::snr_and_integration_time(closed_form, noise, integration_time_s);

    println!("source_mass_kg = {:.6e}", cfg.source.source_mass);
    println!("mean_separation_m = {:.6e}", cfg.source.mean_separation);
    println!("drive_amplitude_m = {:.6e}", cfg.source.drive_amplitude);
    println!("trap_frequency_hz = {fm:.6e}");
    println!("effective_quality = {q:.6e}");
    println!("resonant_rms_displacement_m = {closed_form:.6e}");
    println!("exact_fundamental_force_n = {:.6e}", drive.force_fundamental);
    println!("exact_fundamental_response_m = {exact:.6e}");
    println!("noise_asd_m_rthz = {noise:.6e}");
    println!("integration_time_s = {integration_time_s:.6e}");
    println!("snr_amplitude = {:.6e}", est.snr_amplitude);
    Ok(())
}

fn run_simulate(
    cfg: &SystemConfig,
    duration_s: f64,
    sample_rate_hz: f64,
    seed: u64,
    out: &Path,
    csv_out: Option<&Path>,
) -> Result<()> {
    let sim = timeseries::simulate_experiment(cfg, duration_s, sample_rate_hz, seed)?;
    timeseries::write_record(out, &sim.series)?;
    if let Some(csv) = csv_out {
        let file = std::fs::File::create(csv)?;
        timeseries::write_record_csv(std::io::BufWriter::new(file), &sim.series)?;
        println!("record_csv = {}", csv.display());
    }
    println!("record = {}", out.display());
    println!("samples = {}", sim.series.values.len());
    println!("sample_rate_hz = {sample_rate_hz:.6e}");
    println!("seed = {seed}");
    println!("trap_frequency_hz = {:.6e}", sim.report.derived.trapped_frequency);
    println!("tone_frequency_hz = {:.6e}", sim.report.tone_frequency);
    println!("tone_amplitude_m = {:.6e}", sim.report.tone_amplitude);
    println!("noise_asd_at_tone_m_rthz = {:.6e}", sim.report.noise_asd_at_tone);
    println!("calibration_m_per_v = {:.6e}", cfg.cavity.calibration);
    Ok(())
}

fn run_analyze(
    cfg: &SystemConfig,
    record: &Path,
    segment_length: Option<usize>,
    band: Option<(f64, f64)>,
    lockin_frequency_hz: Option<f64>,
    integration_time_s: f64,
    out: &Path,
) -> Result<()> {
    let raw = timeseries::read_record(record)?;
    let meters = match raw.unit {
        Unit::Volts => spectral::calibrate(&raw)?,
        Unit::Meters => raw,
    };
    let n = meters.values.len();
    let seg = segment_length
        .unwrap_or_else(|| (meters.sample_rate.round() as usize).clamp(8, n));
    let welch = spectral::welch_psd(&meters, &WelchConfig::new(seg)?)?;

    let mut csv = String::from("frequency_hz,asd_m_rthz\n");
    for (f, v) in welch.psd.grid().frequencies().iter().zip(welch.psd.values()) {
        csv.push_str(&format!("{f:.9e},{:.9e}\n", v.sqrt()));
    }
    std::fs::write(out, csv)?;

    println!("asd_csv = {}", out.display());
    println!("samples = {n}");
    println!("duration_s = {:.6e}", meters.duration());
    println!("resolution_bandwidth_hz = {:.6e}", welch.resolution_bandwidth);
    println!("welch_segments = {}", welch.segments);

    if let Some(band) = band {
        let fit = spectral::fit_resonance(&welch.psd, band, DampingModel::Viscous)?;
        println!("fit_center_frequency_hz = {:.6e}", fit.center_frequency);
        println!("fit_quality = {:.6e}", fit.quality);
        println!("fit_peak_asd_m_rthz = {:.6e}", fit.peak_asd);
        println!("fit_residual_norm = {:.6e}", fit.residual_norm);
    }

    let f_ref = lockin_frequency_hz.unwrap_or(cfg.source.drive_frequency);
    let lock = spectral::lockin(&meters, f_ref, integration_time_s)?;
    println!("lockin_frequency_hz = {f_ref:.6e}");
    println!("lockin_integration_time_s = {integration_time_s:.6e}");
    println!("lockin_in_phase_m = {:.6e}", lock.in_phase);
    println!("lockin_quadrature_m = {:.6e}", lock.quadrature);
    println!("lockin_amplitude_m = {:.6e}", lock.amplitude);
    println!("lockin_phase_rad = {:.6e}", lock.phase);
    println!("lockin_sigma_m = {:.6e}", lock.statistical_sigma);
    println!("lockin_snr = {:.6e}", lock.amplitude / lock.statistical_sigma);
    Ok(())
}

fn run_optimize(
    cfg: &SystemConfig,
    objective: &str,
    params: &[String],
    budget: usize,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let parameters: Vec<Parameter> =
        params.iter().map(|s| parse_param(s)).collect::<Result<_>>()?;
    let names: Vec<String> = parameters.iter().map(|p| p.name.clone()).collect();
    let space = SearchSpace::new(parameters)?;
    let base = *cfg;

    let eval = move |point: &[f64], objective: &str| -> Result<f64> {
        let overrides: Vec<(&str, f64)> =
            names.iter().map(String::as_str).zip(point.iter().copied()).collect();
        match objective {
            "snr" => optimize::snr_objective(&base, &overrides),
            "displacement" => {
                let cfg = optimize::apply_overrides(&base, &overrides)?;
                let derived = cfg.derive()?;
                Ok(gravity::resonant_rms_displacement(
                    &cfg.source,
                    derived.effective_quality,
                    derived.trapped_frequency,
                ))
            }
            other => Err(Error::Invariant {
                field: "objective",
                msg: format!("unknown objective `{other}`"),
            }),
        }
    };
    // reject unknown objectives before burning the budget
    eval(
        &space.parameters().iter().map(|p| (p.lower + p.upper) / 2.0).collect::<Vec<_>>(),
        objective,
    )
    .map(|_| ())
    .or_else(|e| match e {
        Error::Invariant { field: "objective", .. } => Err(e),
        _ => Ok(()),
    })?;

    let obj_name = objective.to_string();
    let result = optimize::optimize(
        move |p| eval(p, &obj_name).unwrap_or(f64::NAN),
        &space,
        budget,
        seed,
    )?;

    std::fs::write(out, result.trace_csv())?;
    println!("trace_csv = {}", out.display());
    println!("objective = {objective}");
    println!("evaluations = {}", result.evaluations);
    for (name, value) in &result.best_point {
        println!("best.{name} = {value:.6e}");
    }
    println!("best_objective = {:.6e}", result.best_objective);
    Ok(())
}
