use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kscross_core::mesh::{build_polar, laplacian, BoundaryCondition};
use kscross_core::model::{InitialData, Params};
use kscross_core::solver::{initial_state, residual_pp, NewtonSettings, Scheme, Stepper};

fn bench_laplacian(c: &mut Criterion) {
    let mut g = c.benchmark_group("laplacian");
    for (nr, nt) in [(16, 32), (32, 64), (64, 128)] {
        let grid = Arc::new(build_polar(nr, nt, 1.0).unwrap());
        let rho = InitialData::Experiment1.rho0(&grid).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(format!("{nr}x{nt}")), &rho, |b, f| {
            b.iter(|| laplacian(black_box(f), BoundaryCondition::Neumann))
        });
    }
    g.finish();
}

fn bench_residual(c: &mut Criterion) {
    let grid = Arc::new(build_polar(32, 64, 1.0).unwrap());
    let p = Params::new(1e-3, 1, 1.0).unwrap();
    let s = initial_state(&grid, &InitialData::Experiment1, &p).unwrap();
    c.bench_function("residual_pp/32x64", |b| b.iter(|| residual_pp(black_box(&s), &s, 1e-3, &p).unwrap()));
}

fn bench_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("implicit_step");
    g.sample_size(10);
    for (scheme, eps) in [(Scheme::Pp, 1), (Scheme::Pe, 0), (Scheme::Log, 0)] {
        for (nr, nt) in [(16, 32), (32, 64)] {
            let grid = Arc::new(build_polar(nr, nt, 1.0).unwrap());
            let p = Params::new(1e-3, eps, 1.0).unwrap();
            let s = initial_state(&grid, &InitialData::Experiment1, &p).unwrap();
            let stepper = Stepper::new(grid, p, scheme, NewtonSettings::default()).unwrap();
            g.bench_with_input(BenchmarkId::new(scheme.name(), format!("{nr}x{nt}")), &s, |b, s| {
                b.iter(|| stepper.attempt_step(black_box(s), 1e-3, 2.0).unwrap())
            });
        }
    }
    g.finish();
}

criterion_group!(benches, bench_laplacian, bench_residual, bench_step);
criterion_main!(benches);
