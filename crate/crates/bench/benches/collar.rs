use std::hint::black_box;

use collar_core::bergman::{counterexample_report, density};
use collar_core::corona::{build_family, collar_generator, corona_decompose, CoronaSettings};
use collar_core::dbar::{solve_dbar, DbarOptions, ModeSamples};
use collar_core::geometry::make_collar;
use collar_core::peak::{peak_section, PeakSettings};
use collar_core::quadrature::log_mode_integral;
use collar_core::{Amplitude, CollarPoint, DbarRhs, ModeSection, QuadratureSpec, WeightSpec, YGrid};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;

fn quadrature(c: &mut Criterion) {
    let q = QuadratureSpec::default();
    let mut g = c.benchmark_group("mode_integral");
    for rate in [0.0, 60.0, 2.5e5] {
        g.bench_with_input(BenchmarkId::from_parameter(rate), &rate, |b, &rate| {
            b.iter(|| log_mode_integral(black_box(rate), 2, -1.5, 1.5, &q).unwrap())
        });
    }
    g.finish();
}

fn bergman(c: &mut Criterion) {
    let q = QuadratureSpec::default();
    let col = make_collar(0.05, 16).unwrap();
    let p = CollarPoint::new(&col, 0.3, 0.0).unwrap();
    c.bench_function("density_k16", |b| b.iter(|| density(&col, 2, black_box(&p), &q).unwrap()));
    let col = make_collar(0.1, 8).unwrap();
    c.bench_function("counterexample_report", |b| b.iter(|| counterexample_report(black_box(&col), 2, &q).unwrap()));
}

fn dbar(c: &mut Criterion) {
    let col = make_collar(0.5, 2).unwrap();
    let mut g = c.benchmark_group("solve_dbar");
    for n in [512usize, 2048] {
        let grid = YGrid::covering(&col, n).unwrap();
        let bump = |y: f64, c0: f64| (-((y - c0) / 0.3).powi(2)).exp();
        let modes: ModeSamples = [(0, 0.0), (1, -0.3), (-2, 0.4)]
            .into_iter()
            .map(|(k, c0)| (k, grid.ys().iter().map(|&y| Complex64::new(bump(y, c0), 0.0)).collect()))
            .collect();
        let rhs = DbarRhs::new(2, grid, modes).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &rhs, |b, rhs| {
            b.iter(|| solve_dbar(rhs, &col, &WeightSpec::Zero, &DbarOptions::default()).unwrap())
        });
    }
    g.finish();
    let col = make_collar(0.1, 0).unwrap();
    let mut g = c.benchmark_group("peak_section");
    g.sample_size(10);
    g.bench_function("m16_core", |b| {
        b.iter(|| peak_section(&col, 16, 0.0, &PeakSettings::default()).unwrap())
    });
    g.finish();
}

fn corona(c: &mut Criterion) {
    let col = make_collar(0.05, 16).unwrap();
    let settings = CoronaSettings {
        n_y: 2048,
        ..CoronaSettings::default()
    };
    let generator = collar_generator(&col, 1, &settings).unwrap();
    let family = build_family(&col, &generator, &[1, -1]).unwrap();
    let mut s = ModeSection::new(2).unwrap();
    for k in -4i32..=4 {
        let a = Amplitude::new(Complex64::new(1.0, 0.5 * k as f64), -col.rate() * k.abs() as f64 * col.y_max());
        s.set(k, a).unwrap();
    }
    let mut g = c.benchmark_group("corona");
    g.sample_size(10);
    g.bench_function("generator_n2048", |b| b.iter(|| collar_generator(black_box(&col), 1, &settings).unwrap()));
    g.bench_function("decompose_n2048", |b| {
        b.iter(|| corona_decompose(black_box(&s), &family, &col, &settings).unwrap())
    });
    g.finish();
}

criterion_group!(benches, quadrature, bergman, dbar, corona);
criterion_main!(benches);
