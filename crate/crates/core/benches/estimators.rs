use std::hint::black_box;

use bvylab::estimator::{pair_measure_direct, pair_measure_localized, BVYConfig};
use bvylab::lipcalc::{FormulaId, TestFunction};
use bvylab::par::{map_indexed, map_indexed_seq};
use bvylab::rng::{stream, Domain};
use bvylab::space::{SpaceInstance, Window};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::Rng;

fn pool(n: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .unwrap()
}

fn primitive(c: &mut Criterion) {
    let n = 1 << 18;
    let f = |i: usize| {
        let mut r = stream(1, Domain::Window, i as u64);
        (0..8).map(|_| r.random::<f64>()).sum::<f64>()
    };
    let mut g = c.benchmark_group("map_indexed");
    g.bench_function("sequential", |b| {
        b.iter(|| black_box(map_indexed_seq(n, f)))
    });
    g.bench_function("parallel", |b| b.iter(|| black_box(map_indexed(n, f))));
    g.finish();
}

fn estimators(c: &mut Criterion) {
    let s = SpaceInstance::euclidean(Window::unit(2)).unwrap();
    let u = TestFunction::new(
        FormulaId::SmoothBump,
        Window::new(vec![0.2, 0.2], vec![0.8, 0.8]).unwrap(),
    );
    let cfg = BVYConfig {
        seed: 3,
        n_outer: 20_000,
        n_pairs: 200_000,
        ..Default::default()
    };
    let threads = [1, rayon::current_num_threads().max(2)];
    let mut g = c.benchmark_group("pair_measure");
    g.sample_size(10);
    for t in threads {
        let p = pool(t);
        g.bench_with_input(BenchmarkId::new("localized", t), &t, |b, _| {
            b.iter(|| p.install(|| black_box(pair_measure_localized(&s, &u, &cfg, 300.0).unwrap())))
        });
        g.bench_with_input(BenchmarkId::new("direct", t), &t, |b, _| {
            b.iter(|| p.install(|| black_box(pair_measure_direct(&s, &u, &cfg, 300.0).unwrap())))
        });
    }
    g.finish();
}

criterion_group!(benches, primitive, estimators);
criterion_main!(benches);
