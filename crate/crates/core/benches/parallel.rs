//! Data-parallel kernels on the default pool versus a single worker.
//! Build with `--no-default-features` for the purely sequential path.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nat_core::evaluators::benchmarks::dtlz1;
use nat_core::genome::sample_uniform;
use nat_core::rng::seeded;
use nat_core::selection::{non_dominated_sort, survive, ReferenceDirectionSet};
use nat_core::surrogate::{build_ensemble, Regressor};
use nat_core::{par, Genome, SearchSpaceConfig};
use rand::Rng;

fn pools() -> [(&'static str, usize); 2] {
    let default = std::thread::available_parallelism().map_or(1, |n| n.get());
    [("default", default), ("single", 1)]
}

fn ensemble(c: &mut Criterion) {
    let mut rng = seeded(1);
    let g: Vec<Genome> = (0..300).map(|_| sample_uniform(&SearchSpaceConfig::default(), &mut rng)).collect();
    let x: Vec<Vec<f64>> = g.iter().map(Genome::features).collect();
    let y: Vec<f64> = x.iter().map(|r| r.iter().sum::<f64>().sin()).collect();
    let mut group = c.benchmark_group("ensemble_fit_predict");
    group.sample_size(10);
    for (name, threads) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                par::with_threads(threads, || {
                    let e = build_ensemble(&x, &y, 100, &mut seeded(2)).unwrap();
                    e.predict_rows(&x)
                })
            })
        });
    }
    group.finish();
}

fn selection(c: &mut Criterion) {
    let mut rng = seeded(3);
    let points: Vec<Vec<f64>> = (0..312)
        .map(|_| {
            let x: Vec<f64> = (0..7).map(|_| rng.random()).collect();
            dtlz1(&x, 3).unwrap().into_inner()
        })
        .collect();
    let z = ReferenceDirectionSet::sized_for(3, 156).unwrap();
    let mut group = c.benchmark_group("survive_312_to_156");
    for (name, threads) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| par::with_threads(threads, || survive(&points, 156, &z, &mut seeded(4)).unwrap()))
        });
    }
    group.finish();

    let mut group = c.benchmark_group("non_dominated_sort_2000x5");
    let cloud: Vec<Vec<f64>> = (0..2000).map(|_| (0..5).map(|_| rng.random()).collect()).collect();
    for (name, threads) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| par::with_threads(threads, || non_dominated_sort(&cloud)))
        });
    }
    group.finish();
}

criterion_group!(benches, ensemble, selection);
criterion_main!(benches);
