use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use fusecraft::fuzzy::{default_description, FuzzyLut};
use fusecraft::{fuse_fuzzy_direct, fuse_with_model, AnfisHyper, MamdaniFis};
use fusecraft_bench::{synthetic_pair, SIZES};

fn fuzzy(c: &mut Criterion) {
    let fis = MamdaniFis::new(&default_description()).unwrap();
    c.bench_function("fuzzy/lut_build", |b| {
        b.iter(|| FuzzyLut::build(black_box(&fis)))
    });

    let lut = FuzzyLut::build(&fis);
    let mut group = c.benchmark_group("fuzzy/fuse_lut");
    for n in SIZES {
        let (a, bb) = synthetic_pair(n, n);
        group.throughput(Throughput::Elements((n * n) as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| fusecraft::fusion::fuse_with_lut(black_box(&a), black_box(&bb), &lut))
        });
    }
    group.finish();

    let (a, bb) = synthetic_pair(64, 64);
    c.bench_function("fuzzy/fuse_direct/64", |b| {
        b.iter(|| fuse_fuzzy_direct(black_box(&a), black_box(&bb), &fis))
    });
}

fn neuro_fuzzy(c: &mut Criterion) {
    let mut group = c.benchmark_group("anfis");
    group.sample_size(20);
    group.bench_function("train_default", |b| {
        b.iter(|| AnfisHyper::default().train().unwrap())
    });

    let (model, _) = AnfisHyper::default().train().unwrap();
    for n in SIZES {
        let (a, bb) = synthetic_pair(n, n);
        group.throughput(Throughput::Elements((n * n) as u64));
        group.bench_with_input(BenchmarkId::new("predict", n), &n, |b, _| {
            b.iter(|| fuse_with_model(black_box(&a), black_box(&bb), &model))
        });
    }
    group.finish();
}

criterion_group!(benches, fuzzy, neuro_fuzzy);
criterion_main!(benches);
