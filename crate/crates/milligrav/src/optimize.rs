//! Bounded derivative-free search over experiment parameters, plus the
//! analytic SNR objective it usually drives.
//!
//! The search is a multi-start Nelder-Mead simplex in normalized
//! coordinates (log-mapped for logarithmic parameters), with candidate
//! points projected into the bounds and constraint violations handled by a
//! large penalty. Deterministic given the seed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::budget;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::gravity;

/// Coordinate mapping of one search parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Logarithmic,
}

#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub scale: Scale,
}

/// Feasibility predicate over a physical point.
pub type Predicate = Box<dyn Fn(&[f64]) -> bool + Sync + Send>;

/// Named feasibility predicate over a physical point.
pub struct Constraint {
    pub name: String,
    pub predicate: Predicate,
}

pub struct SearchSpace {
    parameters: Vec<Parameter>,
    constraints: Vec<Constraint>,
}

impl SearchSpace {
    pub fn new(parameters: Vec<Parameter>) -> Result<Self> {
        if parameters.is_empty() {
            return Err(Error::Invariant { field: "search space", msg: "no parameters".into() });
        }
        for p in &parameters {
            if !(p.lower.is_finite() && p.upper.is_finite() && p.lower < p.upper) {
                return Err(Error::Invariant {
                    field: "parameter bounds",
                    msg: format!("{}: [{:e}, {:e}]", p.name, p.lower, p.upper),
                });
            }
            if p.scale == Scale::Logarithmic && p.lower <= 0.0 {
                return Err(Error::Invariant {
                    field: "parameter bounds",
                    msg: format!("{}: log scale needs a positive lower bound", p.name),
                });
            }
        }
        Ok(Self { parameters, constraints: Vec::new() })
    }

    pub fn with_constraint<F>(mut self, name: &str, predicate: F) -> Self
    where
        F: Fn(&[f64]) -> bool + Sync + Send + 'static,
    {
        self.constraints.push(Constraint { name: name.into(), predicate: Box::new(predicate) });
        self
    }

    pub fn parameters(&self) -> &[Parameter] {
        &self.parameters
    }

    pub fn dimension(&self) -> usize {
        self.parameters.len()
    }

    fn to_physical(&self, u: &[f64]) -> Vec<f64> {
        self.parameters
            .iter()
            .zip(u)
            .map(|(p, &t)| match p.scale {
                Scale::Linear => p.lower + t * (p.upper - p.lower),
                Scale::Logarithmic => (p.lower.ln() + t * (p.upper.ln() - p.lower.ln())).exp(),
            })
            .collect()
    }

    fn feasible(&self, point: &[f64]) -> bool {
        self.constraints.iter().all(|c| (c.predicate)(point))
    }
}

/// One objective evaluation. Infeasible points carry `objective = NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub point: Vec<f64>,
    pub objective: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub best_point: Vec<(String, f64)>,
    pub best_objective: f64,
    pub evaluations: usize,
    pub trace: Vec<TraceEntry>,
}

impl SearchResult {
    /// CSV trace: `evaluation,<param...>,objective,feasible`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("evaluation");
        for (name, _) in &self.best_point {
            out.push(',');
            out.push_str(name);
        }
        out.push_str(",objective,feasible\n");
        for (i, e) in self.trace.iter().enumerate() {
            out.push_str(&format!("{i}"));
            for v in &e.point {
                out.push_str(&format!(",{v:.9e}"));
            }
            out.push_str(&format!(",{:.9e},{}\n", e.objective, u8::from(e.feasible)));
        }
        out
    }
}

const PENALTY: f64 = 1e100;

/// Plain bounded Nelder-Mead minimization in `[lo, hi]^d`. Candidates are
/// projected onto the box. Returns `(x_best, f_best, evaluations)`.
pub(crate) fn nelder_mead_min<F>(
    mut f: F,
    x0: &[f64],
    step: &[f64],
    lo: &[f64],
    hi: &[f64],
    max_evals: usize,
) -> (Vec<f64>, f64, usize)
where
    F: FnMut(&[f64]) -> f64,
{
    let d = x0.len();
    let clamp = |x: &mut Vec<f64>| {
        for i in 0..d {
            x[i] = x[i].clamp(lo[i], hi[i]);
        }
    };
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    // initial simplex: x0 plus a step along each axis, folded back inside
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    let mut x = x0.to_vec();
    clamp(&mut x);
    let v = eval(&x, &mut evals);
    simplex.push((x, v));
    for i in 0..d {
        let mut xi = simplex[0].0.clone();
        let s = if xi[i] + step[i] <= hi[i] { step[i] } else { -step[i] };
        xi[i] = (xi[i] + s).clamp(lo[i], hi[i]);
        let vi = eval(&xi, &mut evals);
        simplex.push((xi, vi));
    }

    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let f_best = simplex[0].1;
        let f_worst = simplex[d].1;
        let spread = (f_worst - f_best).abs();
        let x_spread = (0..d)
            .map(|i| {
                simplex.iter().map(|(x, _)| x[i]).fold(f64::NEG_INFINITY, f64::max)
                    - simplex.iter().map(|(x, _)| x[i]).fold(f64::INFINITY, f64::min)
            })
            .fold(0.0f64, f64::max);
        if spread <= 1e-12 * (1.0 + f_best.abs()) && x_spread <= 1e-10 {
            break;
        }

        // centroid of all but the worst
        let mut centroid = vec![0.0; d];
        for (x, _) in &simplex[..d] {
            for i in 0..d {
                centroid[i] += x[i] / d as f64;
            }
        }

        let blend = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
            a.iter().zip(b).map(|(ai, bi)| ai + t * (bi - ai)).collect()
        };

        // reflection
        let mut xr = blend(&centroid, &simplex[d].0, -1.0);
        clamp(&mut xr);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            // expansion
            let mut xe = blend(&centroid, &simplex[d].0, -2.0);
            clamp(&mut xe);
            let fe = eval(&xe, &mut evals);
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
        } else {
            // contraction, outside or inside of the worst vertex
            let (mut xc, better_than) = if fr < simplex[d].1 {
                (blend(&centroid, &xr, 0.5), fr)
            } else {
                (blend(&centroid, &simplex[d].0, 0.5), simplex[d].1)
            };
            clamp(&mut xc);
            let fc = eval(&xc, &mut evals);
            if fc < better_than {
                simplex[d] = (xc, fc);
            } else {
                // shrink toward the best vertex
                let best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    let mut xs = blend(&best, &v.0, 0.5);
                    clamp(&mut xs);
                    let fs = eval(&xs, &mut evals);
                    *v = (xs, fs);
                }
            }
        }
    }

    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    let (x_best, f_best) = simplex.swap_remove(0);
    (x_best, f_best, evals)
}

/// Maximize `objective` over the search space with at most `budget`
/// evaluations. Deterministic given `(space, budget, seed)`.
pub fn optimize<F>(
    objective: F,
    space: &SearchSpace,
    budget: usize,
    seed: u64,
) -> Result<SearchResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let d = space.dimension();
    if budget < d + 2 {
        return Err(Error::BudgetTooSmall { budget, needed: d + 2 });
    }

    let mut trace: Vec<TraceEntry> = Vec::new();
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut evals = 0usize;

    {
        let mut wrapped = |u: &[f64]| -> f64 {
            let p = space.to_physical(u);
            evals += 1;
            if !space.feasible(&p) {
                trace.push(TraceEntry { point: p, objective: f64::NAN, feasible: false });
                return PENALTY;
            }
            let v = objective(&p);
            if !v.is_finite() {
                trace.push(TraceEntry { point: p, objective: f64::NAN, feasible: false });
                return PENALTY;
            }
            trace.push(TraceEntry { point: p.clone(), objective: v, feasible: true });
            if best.as_ref().is_none_or(|(_, b)| v > *b) {
                best = Some((p, v));
            }
            -v
        };

        let n_starts = (budget / (60 * (d + 1))).clamp(1, 8);
        let per_start = budget / n_starts;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lo = vec![0.0; d];
        let hi = vec![1.0; d];
        let step = vec![0.25; d];
        for s in 0..n_starts {
            let u0: Vec<f64> = if s == 0 {
                vec![0.5; d]
            } else {
                (0..d).map(|_| rng.random_range(0.0..1.0)).collect()
            };
            nelder_mead_min(&mut wrapped, &u0, &step, &lo, &hi, per_start);
        }
    }

    let (point, value) = best.ok_or(Error::NonFiniteObjective)?;
    Ok(SearchResult {
        best_point: space.parameters.iter().map(|p| p.name.clone()).zip(point).collect(),
        best_objective: value,
        evaluations: evals,
        trace,
    })
}

/// Override keys accepted by [`apply_overrides`] / the `optimize`
/// subcommand's `--param` names.
pub const OVERRIDE_KEYS: &[&str] = &[
    "trap_frequency_hz",
    "optical_stiffness_npm",
    "effective_quality",
    "source_mass_kg",
    "mean_separation_m",
    "drive_amplitude_m",
    "laser_frequency_asd_hz_rthz",
    "intensity_floor_m_rthz",
];

/// Apply named overrides to a configuration. Retuning the trap (via target
/// frequency or stiffness) moves the source drive with it, keeping the
/// protocol resonant. The result is fully validated.
pub fn apply_overrides(cfg: &SystemConfig, overrides: &[(&str, f64)]) -> Result<SystemConfig> {
    let mut out = *cfg;
    let mut retrapped = false;
    for (key, value) in overrides {
        match *key {
            "trap_frequency_hz" => {
                if !value.is_finite() || *value <= 0.0 {
                    return Err(Error::Invariant {
                        field: "trap_frequency_hz",
                        msg: format!("must be > 0, got {value:e}"),
                    });
                }
                out.cavity.optical_stiffness =
                    crate::model::optical_stiffness_for_trap(&out.pendulum, *value);
                retrapped = true;
            }
            "optical_stiffness_npm" => {
                out.cavity.optical_stiffness = *value;
                retrapped = true;
            }
            "effective_quality" => out.feedback.target_quality = *value,
            "source_mass_kg" => out.source.source_mass = *value,
            "mean_separation_m" => out.source.mean_separation = *value,
            "drive_amplitude_m" => out.source.drive_amplitude = *value,
            "laser_frequency_asd_hz_rthz" => out.noise.laser_frequency_asd = *value,
            "intensity_floor_m_rthz" => out.noise.intensity_floor = *value,
            other => {
                return Err(Error::Invariant {
                    field: "override",
                    msg: format!("unknown parameter `{other}`"),
                })
            }
        }
    }
    if retrapped {
        out.validate()?;
        out.source.drive_frequency =
            crate::model::trapped_frequency(&out.pendulum, &out.cavity)?;
    }
    out.validate()?;
    Ok(out)
}

/// Analytic amplitude SNR at one second of integration: closed-form resonant
/// signal against the analytic budget total at the trapped resonance. No
/// stochastic simulation inside — cheap and deterministic for search loops.
pub fn snr_objective(cfg: &SystemConfig, overrides: &[(&str, f64)]) -> Result<f64> {
    let cfg = apply_overrides(cfg, overrides)?;
    let derived = cfg.derive()?;
    let signal = gravity::resonant_rms_displacement(
        &cfg.source,
        derived.effective_quality,
        derived.trapped_frequency,
    );
    let noise = budget::total_asd_at(&cfg, &derived, derived.trapped_frequency);
    Ok(gravity::snr_and_integration_time(signal, noise, 1.0).snr_amplitude)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    fn one_d(lo: f64, hi: f64, scale: Scale) -> SearchSpace {
        SearchSpace::new(vec![Parameter { name: "x".into(), lower: lo, upper: hi, scale }])
            .unwrap()
    }

    #[test]
    fn quadratic_maximum_is_found() {
        let space = one_d(0.0, 10.0, Scale::Linear);
        let r = optimize(|p| -(p[0] - 2.0) * (p[0] - 2.0), &space, 400, 1).unwrap();
        assert!((r.best_point[0].1 - 2.0).abs() < 1e-4, "x = {}", r.best_point[0].1);
        assert!(r.evaluations <= 400);
    }

    #[test]
    fn monotone_objective_selects_the_bound() {
        // Eq.(1) displacement falls as f^-2: the search must pick 50 Hz.
        let cfg = SystemConfig::default();
        let space = one_d(50.0, 2000.0, Scale::Logarithmic);
        let r = optimize(
            |p| {
                gravity::resonant_rms_displacement(&cfg.source, 250.0, p[0])
            },
            &space,
            600,
            3,
        )
        .unwrap();
        assert!(rel(r.best_point[0].1, 50.0) < 1e-6, "f = {}", r.best_point[0].1);
    }

    #[test]
    fn full_snr_over_trap_frequency_matches_a_grid_scan() {
        let cfg = SystemConfig::default();
        let obj = |p: &[f64]| snr_objective(&cfg, &[("trap_frequency_hz", p[0])]).unwrap();
        let space = one_d(50.0, 2000.0, Scale::Logarithmic);
        let r = optimize(obj, &space, 800, 17).unwrap();

        // exhaustive oracle on a 200-point grid
        let n = 200;
        let (mut best_f, mut best_v) = (0.0, f64::NEG_INFINITY);
        for i in 0..n {
            let f = (50f64.ln() + (2000f64.ln() - 50f64.ln()) * i as f64 / (n - 1) as f64).exp();
            let v = obj(&[f]);
            if v > best_v {
                best_v = v;
                best_f = f;
            }
        }
        assert!(
            r.best_objective >= best_v * (1.0 - 1e-3),
            "optimizer {} vs grid {} at {best_f} Hz",
            r.best_objective,
            best_v
        );
        // interior optimum: the grid best is not at either bound
        assert!(best_f > 51.0 && best_f < 1990.0, "grid best at {best_f}");
    }

    #[test]
    fn results_stay_in_bounds_and_respect_constraints() {
        let space = SearchSpace::new(vec![
            Parameter { name: "a".into(), lower: -1.0, upper: 1.0, scale: Scale::Linear },
            Parameter { name: "b".into(), lower: 0.1, upper: 10.0, scale: Scale::Logarithmic },
        ])
        .unwrap()
        .with_constraint("a below b", |p| p[0] < p[1]);
        let r = optimize(|p| -(p[0] - 0.5f64).powi(2) - (p[1] - 0.3f64).powi(2), &space, 500, 9)
            .unwrap();
        for e in &r.trace {
            assert!((-1.0..=1.0).contains(&e.point[0]));
            assert!((0.1..=10.0).contains(&e.point[1]));
            if e.feasible {
                assert!(e.point[0] < e.point[1]);
            }
        }
        let best: Vec<f64> = r.best_point.iter().map(|(_, v)| *v).collect();
        assert!(best[0] < best[1]);
    }

    #[test]
    fn best_so_far_is_monotone_and_matches_best_objective() {
        let space = one_d(0.0, 1.0, Scale::Linear);
        let r = optimize(|p| (p[0] * 13.7).sin(), &space, 300, 5).unwrap();
        let mut so_far = f64::NEG_INFINITY;
        for e in r.trace.iter().filter(|e| e.feasible) {
            so_far = so_far.max(e.objective);
        }
        assert_eq!(so_far, r.best_objective);
    }

    #[test]
    fn identical_inputs_give_identical_results() {
        let space = one_d(0.0, 10.0, Scale::Linear);
        let f = |p: &[f64]| -(p[0] - 3.3f64).powi(2);
        let a = optimize(f, &space, 250, 11).unwrap();
        let b = optimize(f, &space, 250, 11).unwrap();
        assert_eq!(a, b);
        let c = optimize(f, &space, 250, 12).unwrap();
        assert_eq!(c.best_objective.max(a.best_objective), a.best_objective.max(c.best_objective));
    }

    #[test]
    fn too_small_budget_and_hopeless_objectives_error() {
        let space = one_d(0.0, 1.0, Scale::Linear);
        assert!(matches!(
            optimize(|_| 0.0, &space, 2, 0),
            Err(Error::BudgetTooSmall { .. })
        ));
        assert!(matches!(
            optimize(|_| f64::NAN, &space, 100, 0),
            Err(Error::NonFiniteObjective)
        ));
    }

    #[test]
    fn snr_objective_scalings() {
        let cfg = SystemConfig::default();
        let base = snr_objective(&cfg, &[]).unwrap();
        assert!((base - 1.0).abs() < 0.2, "default SNR {base}");
        // linear in source mass
        let ten = snr_objective(&cfg, &[("source_mass_kg", 1e-3)]).unwrap();
        assert!(rel(ten, 10.0 * base) < 1e-9);
        // inverse cube in separation (amplitude fixed)
        let far = snr_objective(&cfg, &[("mean_separation_m", 7.5e-3)]).unwrap();
        assert!(rel(far, base / 8.0) < 1e-9);
    }

    #[test]
    fn invalid_overrides_are_rejected() {
        let cfg = SystemConfig::default();
        assert!(snr_objective(&cfg, &[("mean_separation_m", 1e-3)]).is_err()); // collision
        assert!(snr_objective(&cfg, &[("no_such_knob", 1.0)]).is_err());
    }

    #[test]
    fn trace_csv_shape() {
        let space = one_d(0.0, 1.0, Scale::Linear);
        let r = optimize(|p| -p[0], &space, 50, 2).unwrap();
        let csv = r.trace_csv();
        assert!(csv.starts_with("evaluation,x,objective,feasible\n"));
        assert_eq!(csv.lines().count(), r.trace.len() + 1);
    }
}
