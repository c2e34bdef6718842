use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use recnet_bench::{fixture, one_epoch};
use recnet_core::retrieval::topk_for_user;
use recnet_core::rng::{self, Stream};
use recnet_core::{sgd_step, train, AliasTable, EmbeddingStore, NegativeSampler};

fn alias(c: &mut Criterion) {
    let weights: Vec<f64> = (1..=10_000).map(|i| (i as f64).powf(0.75)).collect();
    let table = AliasTable::new(&weights).unwrap();
    let mut rng = rng::stream(1, Stream::Negative);
    c.bench_function("alias/sample_10k", |b| b.iter(|| black_box(table.sample(&mut rng))));
    c.bench_function("alias/build_10k", |b| b.iter(|| AliasTable::new(black_box(&weights)).unwrap()));

    let g = fixture(5_000);
    let neg = NegativeSampler::new(&g).unwrap();
    c.bench_function("negatives/k5", |b| b.iter(|| neg.sample_negatives(black_box(7), 5, &mut rng)));
}

fn step(c: &mut Criterion) {
    let mut group = c.benchmark_group("sgd_step");
    for dim in [32, 128] {
        let mut store = EmbeddingStore::init(10, 100, dim, 2).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(dim), &dim, |b, _| {
            b.iter(|| sgd_step(&mut store, 3, 5, black_box(&[11, 42, 77, 8, 90]), 1e-4))
        });
    }
    group.finish();
}

fn epoch(c: &mut Criterion) {
    let mut group = c.benchmark_group("train_epoch");
    group.sample_size(10);
    let cfg = one_epoch();
    for users in [2_000, 4_000] {
        let g = fixture(users);
        group.throughput(Throughput::Elements((users * cfg.samples_per_user) as u64));
        group.bench_with_input(BenchmarkId::new("serial", users), &g, |b, g| b.iter(|| train(g, &cfg).unwrap()));
    }
    let g = fixture(4_000);
    let parallel = recnet_core::TrainConfig { workers: 4, ..cfg.clone() };
    group.bench_function("hogwild4/4000", |b| b.iter(|| train(&g, &parallel).unwrap()));
    group.finish();
}

fn topk(c: &mut Criterion) {
    let store = EmbeddingStore::init(100, 20_000, 128, 3).unwrap();
    let mut group = c.benchmark_group("topk_for_user");
    for k in [10, 100] {
        group.bench_with_input(BenchmarkId::from_parameter(k), &k, |b, &k| {
            b.iter(|| topk_for_user(&store, None, black_box(17), k, false))
        });
    }
    group.finish();
}

criterion_group!(benches, alias, step, epoch, topk);
criterion_main!(benches);
