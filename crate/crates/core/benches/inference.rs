use std::hint::black_box;

use anyspace::dtree::{el2dt, Dtree};
use anyspace::generate::{random_evidence, random_network, random_order};
use anyspace::rc::{batch_query, mean_calls_over_seeds, tradeoff_curve, CacheFactor};
use anyspace::Exec;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn network(n: usize) -> Dtree {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let net = random_network(&mut rng, n, 2, 3);
    let order = random_order(&mut rng, n);
    el2dt(&net, &order).unwrap()
}

fn queries(c: &mut Criterion) {
    let tree = network(18);
    let cf = CacheFactor::uniform(&tree, 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let evidence: Vec<_> = (0..64).map(|i| random_evidence(&mut rng, tree.factors(), i % 4)).collect();
    let mut group = c.benchmark_group("batch_query");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| batch_query(&tree, &cf, black_box(&evidence), exec).unwrap())
        });
    }
    group.finish();
}

fn seeds(c: &mut Criterion) {
    let tree = network(16);
    let cf = CacheFactor::uniform(&tree, 0.5);
    let seeds: Vec<u64> = (0..64).collect();
    let mut group = c.benchmark_group("mean_calls_over_seeds");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| mean_calls_over_seeds(&tree, &cf, black_box(&seeds), exec).unwrap())
        });
    }
    group.finish();
}

fn curve(c: &mut Criterion) {
    let tree = network(40);
    let full = CacheFactor::full(&tree).capacity(&tree);
    let budgets: Vec<u64> = (0..=16).map(|i| full * i / 16).collect();
    let mut group = c.benchmark_group("tradeoff_curve");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| tradeoff_curve(&tree, black_box(&budgets), exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, queries, seeds, curve);
criterion_main!(benches);
