//! Crate-wide error type.

use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug)]
pub enum Error {
    /// Total stiffness (pendulum + optical) is not positive; the trap is unstable.
    UnstableTrap { total_stiffness: f64 },
    /// A frequency grid was empty or not strictly increasing and positive.
    BadGrid(String),
    /// Two spectra that must share one frequency grid do not.
    GridMismatch,
    /// PSD values must be finite and non-negative.
    BadPsd(String),
    /// Source mass and probe would collide: drive amplitude >= mean separation.
    Collision { separation: f64, amplitude: f64 },
    /// A PSD does not cover the frequency band required by an operation.
    BandNotCovered { need_lo: f64, need_hi: f64, have_lo: f64, have_hi: f64 },
    /// Tone frequency at or above the Nyquist frequency.
    Aliasing { frequency: f64, nyquist: f64 },
    /// Operation requires a series in a different unit.
    WrongUnit { expected: &'static str },
    /// Volts series carries no displacement calibration.
    MissingCalibration,
    /// Calibration factor must be positive.
    BadCalibration(f64),
    /// Record is too short for the requested analysis.
    RecordTooShort { len: usize, needed: usize },
    /// Lock-in span contains fewer than the minimum number of reference cycles.
    TooFewCycles { cycles: f64 },
    /// No spectral peak found in the requested band.
    NoPeak,
    /// Iterative fit failed to converge; the payload carries diagnostics.
    NoConvergence(String),
    /// Ringdown record has no decaying envelope.
    NonDecaying,
    /// Config text is malformed at the given 1-based line.
    ConfigSyntax { line: usize, msg: String },
    /// Config contains a key this tool does not define.
    UnknownKey { line: usize, key: String },
    /// A config or argument value violates a documented invariant.
    Invariant { field: &'static str, msg: String },
    /// Optimizer budget below the minimum for the search dimension.
    BudgetTooSmall { budget: usize, needed: usize },
    /// Objective was non-finite at every start point.
    NonFiniteObjective,
    /// Record file is corrupt or not a record file.
    BadRecordFile(String),
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::UnstableTrap { total_stiffness } => write!(
                f,
                "unstable trap: total stiffness {total_stiffness:e} N/m is not positive"
            ),
            Self::BadGrid(msg) => write!(f, "bad frequency grid: {msg}"),
            Self::GridMismatch => write!(f, "spectra are not on the same frequency grid"),
            Self::BadPsd(msg) => write!(f, "bad PSD: {msg}"),
            Self::Collision { separation, amplitude } => write!(
                f,
                "source mass collides with probe: drive amplitude {amplitude:e} m >= separation {separation:e} m"
            ),
            Self::BandNotCovered { need_lo, need_hi, have_lo, have_hi } => write!(
                f,
                "PSD covers [{have_lo:e}, {have_hi:e}] Hz but [{need_lo:e}, {need_hi:e}] Hz is required"
            ),
            Self::Aliasing { frequency, nyquist } => write!(
                f,
                "tone at {frequency:e} Hz aliases: Nyquist frequency is {nyquist:e} Hz"
            ),
            Self::WrongUnit { expected } => write!(f, "series must be in {expected}"),
            Self::MissingCalibration => write!(f, "series carries no displacement calibration"),
            Self::BadCalibration(c) => write!(f, "calibration must be positive, got {c:e} m/V"),
            Self::RecordTooShort { len, needed } => {
                write!(f, "record of {len} samples is too short, need {needed}")
            }
            Self::TooFewCycles { cycles } => {
                write!(f, "lock-in span holds {cycles:.2} reference cycles, need at least 10")
            }
            Self::NoPeak => write!(f, "no spectral peak found in the requested band"),
            Self::NoConvergence(msg) => write!(f, "fit did not converge: {msg}"),
            Self::NonDecaying => write!(f, "record envelope does not decay"),
            Self::ConfigSyntax { line, msg } => write!(f, "config line {line}: {msg}"),
            Self::UnknownKey { line, key } => write!(f, "config line {line}: unknown key `{key}`"),
            Self::Invariant { field, msg } => write!(f, "invalid {field}: {msg}"),
            Self::BudgetTooSmall { budget, needed } => {
                write!(f, "evaluation budget {budget} is below the minimum {needed}")
            }
            Self::NonFiniteObjective => {
                write!(f, "objective was non-finite at every start point")
            }
            Self::BadRecordFile(msg) => write!(f, "bad record file: {msg}"),
            Self::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Self::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e)
    }
}
