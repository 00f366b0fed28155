use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use peakload_bench::pareto_records;
use peakload_core::mle::{anll, fit_mle};
use peakload_core::mqr::{apl, fit_c4, fit_mqr};
use peakload_core::{FitConfig, Formulation, QuantileGrid, Thresholds};

fn objectives(c: &mut Criterion) {
    let recs = pareto_records(2000, 1);
    let grid = QuantileGrid::default();
    let th = Thresholds::default();
    let w = [0.05, 3.0 / 0.45, 6.0 - 3.0 / 0.45, 0.45];
    c.bench_function("apl frechet n=2000", |b| {
        b.iter(|| apl(Formulation::Frechet, black_box(&w), &recs, &grid, &th).unwrap())
    });
    let wm = [0.3, 0.015, 1.8, 0.49];
    c.bench_function("anll frechet n=2000", |b| {
        b.iter(|| anll(Formulation::Frechet, black_box(&wm), &recs, &th).unwrap())
    });
}

fn fits(c: &mut Criterion) {
    let grid = QuantileGrid::default();
    let cfg = FitConfig::default();
    let mut group = c.benchmark_group("fit");
    group.sample_size(10);
    for n in [500, 2000] {
        let recs = pareto_records(n, 2);
        group.bench_with_input(BenchmarkId::new("c4", n), &recs, |b, r| {
            b.iter(|| fit_c4(r, &grid, 0).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("mqr gumbel", n), &recs, |b, r| {
            b.iter(|| fit_mqr(Formulation::Gumbel, r, &grid, 0, &cfg).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("mle frechet", n), &recs, |b, r| {
            b.iter(|| fit_mle(Formulation::Frechet, r, 0, &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, objectives, fits);
criterion_main!(benches);
