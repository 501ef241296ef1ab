//! Parallel-vs-sequential throughput of the grid- and record-sized hot
//! paths. The sequential lane is the same code pinned to a one-thread rayon
//! pool, so the comparison isolates scheduling from arithmetic.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use milligrav::budget::{self, FrequencyGrid};
use milligrav::spectral::{welch_psd, WelchConfig};
use milligrav::timeseries::simulate_experiment;
use milligrav::SystemConfig;

fn pools() -> (rayon::ThreadPool, rayon::ThreadPool) {
    let par = rayon::ThreadPoolBuilder::new().build().unwrap();
    let seq = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    (par, seq)
}

fn bench_budget_grid(c: &mut Criterion) {
    let cfg = SystemConfig::default();
    let derived = cfg.derive().unwrap();
    let grid = FrequencyGrid::log_spaced(1.0, 5e5, 200_000).unwrap();
    let (par, seq) = pools();

    let mut g = c.benchmark_group("budget_grid_200k");
    g.bench_function("parallel", |b| {
        b.iter(|| {
            par.install(|| black_box(budget::default_budget(&cfg, &derived, &grid).unwrap()))
        })
    });
    g.bench_function("sequential", |b| {
        b.iter(|| {
            seq.install(|| black_box(budget::default_budget(&cfg, &derived, &grid).unwrap()))
        })
    });
    g.finish();
}

fn bench_simulate(c: &mut Criterion) {
    let cfg = SystemConfig::default();
    let (par, seq) = pools();

    let mut g = c.benchmark_group("simulate_1s_at_256k");
    g.sample_size(20);
    g.bench_function("parallel", |b| {
        b.iter(|| par.install(|| black_box(simulate_experiment(&cfg, 1.0, 262_144.0, 7).unwrap())))
    });
    g.bench_function("sequential", |b| {
        b.iter(|| seq.install(|| black_box(simulate_experiment(&cfg, 1.0, 262_144.0, 7).unwrap())))
    });
    g.finish();
}

fn bench_welch(c: &mut Criterion) {
    let cfg = SystemConfig::default();
    let sim = simulate_experiment(&cfg, 1.0, 262_144.0, 3).unwrap();
    let meters = milligrav::spectral::calibrate(&sim.series).unwrap();
    let wcfg = WelchConfig::new(16_384).unwrap();
    let (par, seq) = pools();

    let mut g = c.benchmark_group("welch_256k_seg16k");
    g.sample_size(30);
    g.bench_function("parallel", |b| {
        b.iter(|| par.install(|| black_box(welch_psd(&meters, &wcfg).unwrap())))
    });
    g.bench_function("sequential", |b| {
        b.iter(|| seq.install(|| black_box(welch_psd(&meters, &wcfg).unwrap())))
    });
    g.finish();
}

criterion_group!(benches, bench_budget_grid, bench_simulate, bench_welch);
criterion_main!(benches);
