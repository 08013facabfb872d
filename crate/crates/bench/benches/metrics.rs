use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

use smad_core::fixtures::SyntheticDataset;
use smad_core::{bpcer_at_macer, deer, det_points, draw_sample, probit, sweep, ScoreSet};

fn scores(n: usize) -> ScoreSet {
    let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
    let bona: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let morph: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.3).collect();
    ScoreSet::from_scores(&bona, &morph).unwrap()
}

fn bench_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("sweep");
    for n in [1_000, 10_000, 100_000] {
        let s = scores(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &s, |b, s| {
            b.iter(|| sweep(black_box(s)).unwrap())
        });
    }
    group.finish();

    let e = sweep(&scores(10_000)).unwrap();
    c.bench_function("deer/10000", |b| b.iter(|| deer(black_box(&e))));
    c.bench_function("bpcer_at_macer/10000", |b| {
        b.iter(|| bpcer_at_macer(black_box(&e), 0.1).unwrap())
    });
    c.bench_function("det_points/10000", |b| b.iter(|| det_points(black_box(&e))));
}

fn bench_probit(c: &mut Criterion) {
    let grid: Vec<f64> = (1..=1_000).map(|i| f64::from(i) / 1_001.0).collect();
    c.bench_function("probit/1000", |b| {
        b.iter(|| {
            grid.iter()
                .map(|&p| probit(black_box(p)).unwrap())
                .sum::<f64>()
        })
    });
}

fn bench_sampling(c: &mut Criterion) {
    let pool = SyntheticDataset {
        bonafide: 25_000,
        morphs: 0,
    }
    .generate();
    let mut group = c.benchmark_group("draw_sample");
    for m in [160, 2_250, 25_000] {
        group.bench_with_input(BenchmarkId::from_parameter(m), &m, |b, &m| {
            b.iter(|| draw_sample(black_box(&pool), m, 7).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_sweep, bench_probit, bench_sampling);
criterion_main!(benches);
