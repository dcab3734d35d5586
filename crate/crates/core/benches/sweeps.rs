use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use shocklab::entropy::{poincare_check, SampledFunction};
use shocklab::experiments::perturb::random_perturbation;
use shocklab::experiments::sweeps::{case_rng, dissipation_case};
use shocklab::flux::FluxModel;
use shocklab::grid::UniformGrid;
use shocklab::profile::ShockProfile;
use shocklab::sweep;

fn dissipation(c: &mut Criterion) {
    let f = FluxModel::quadratic(1.0, (-2.0, 2.0)).unwrap();
    let p = ShockProfile::auto(&f, 1.0, -1.0).unwrap();
    let grid = UniformGrid::symmetric(16.0, 1025);
    let cases: Vec<_> = (0..64).map(|i| random_perturbation(&mut case_rng(7, i), 0.3)).collect();
    let mut group = c.benchmark_group("dissipation_cases");
    group.sample_size(10);
    group.bench_function(BenchmarkId::new("sequential", cases.len()), |b| {
        b.iter(|| sweep::map_sequential(&cases, |s| dissipation_case(&f, &p, grid, s).unwrap().d_y))
    });
    #[cfg(feature = "parallel")]
    group.bench_function(BenchmarkId::new("parallel", cases.len()), |b| {
        b.iter(|| sweep::map_parallel(&cases, |s| dissipation_case(&f, &p, grid, s).unwrap().d_y))
    });
    group.finish();
}

fn poincare(c: &mut Criterion) {
    let funcs: Vec<SampledFunction> = (1..=256)
        .map(|k| {
            let k = k as f64;
            SampledFunction::with_derivative(UniformGrid::new(-1.0, 1.0, 4001), move |x| ((k * x).sin(), k * (k * x).cos()))
        })
        .collect();
    let mut group = c.benchmark_group("poincare_checks");
    group.bench_function(BenchmarkId::new("sequential", funcs.len()), |b| {
        b.iter(|| sweep::map_sequential(&funcs, |v| black_box(poincare_check(v)).lhs))
    });
    #[cfg(feature = "parallel")]
    group.bench_function(BenchmarkId::new("parallel", funcs.len()), |b| {
        b.iter(|| sweep::map_parallel(&funcs, |v| black_box(poincare_check(v)).lhs))
    });
    group.finish();
}

criterion_group!(benches, dissipation, poincare);
criterion_main!(benches);
