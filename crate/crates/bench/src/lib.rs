//! Criterion groups for the hot paths; registered in `benches/core.rs`.

use std::hint::black_box;

use criterion::{BenchmarkId, Criterion};

use narrowline_core::dynamics::{classify_stability, integrate, FlowParams, SemiclassicalState};
use narrowline_core::noise::{estimate_lineshape, synthesize_locked_field, welch_psd};
use narrowline_core::steady_state::{log_grid, scan_drive, solve_branches};
use narrowline_core::{DimensionlessPoint, NoiseSimConfig};

pub fn steady_state(c: &mut Criterion) {
    let mut g = c.benchmark_group("steady_state");
    for (label, drive) in [("monostable", 1e4), ("bistable", 1e3)] {
        let p = DimensionlessPoint::new(100.0, drive, 0.3, -0.2);
        g.bench_with_input(BenchmarkId::new("solve_branches", label), &p, |b, p| {
            b.iter(|| solve_branches(black_box(p)))
        });
    }
    let drives = log_grid(1.0, 1e5, 400).unwrap();
    g.bench_function("scan_drive_400", |b| b.iter(|| scan_drive(100.0, 0.0, 0.0, black_box(&drives))));
    g.finish();
}

pub fn dynamics(c: &mut Criterion) {
    let mut g = c.benchmark_group("dynamics");
    g.sample_size(20);
    let p = DimensionlessPoint::new(100.0, 1e3, 0.0, 0.0);
    let set = solve_branches(&p).unwrap();
    g.bench_function("classify_three_branches", |b| b.iter(|| classify_stability(black_box(&set), 1e3, 2.0)));
    for k in [1e2, 1e4] {
        let fp = FlowParams::new(&p, k, 2.0).unwrap();
        g.bench_with_input(BenchmarkId::new("integrate_from_vacuum_tau50", k), &fp, |b, fp| {
            b.iter(|| integrate(&SemiclassicalState::ground(), fp, 50.0, 1e-8).unwrap())
        });
    }
    g.finish();
}

pub fn noise(c: &mut Criterion) {
    let mut g = c.benchmark_group("noise");
    g.sample_size(10);
    let cfg = NoiseSimConfig::auto(1.0, 1);
    g.bench_function("synthesize_640k", |b| b.iter(|| synthesize_locked_field(black_box(&cfg)).unwrap()));
    let field = synthesize_locked_field(&cfg).unwrap();
    g.bench_function("welch_psd_640k_64seg", |b| {
        b.iter(|| welch_psd(black_box(&field.samples), field.sample_rate, 64, false).unwrap())
    });
    g.bench_function("estimate_lineshape_640k", |b| b.iter(|| estimate_lineshape(black_box(&field), 64).unwrap()));
    g.finish();
}
