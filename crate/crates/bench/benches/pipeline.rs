use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use splat_uncert::render::{render, weight_map};
use splat_uncert::sparsify::ause;
use splat_uncert::train::{harvest_records, train, TrainConfig};
use splat_uncert_bench::poster_fixture;

fn bench_render(c: &mut Criterion) {
    let mut group = c.benchmark_group("render");
    for n in [500, 2000] {
        let (scene, cams) = poster_fixture(n, 128);
        group.bench_with_input(BenchmarkId::new("poster_128px", n), &n, |b, _| {
            b.iter(|| render(&scene, &cams[3]).unwrap())
        });
    }
    let (scene, cams) = poster_fixture(2000, 128);
    group.bench_function("weight_map_2000", |b| b.iter(|| weight_map(&scene, &cams[3]).unwrap()));
    group.finish();
}

fn bench_train(c: &mut Criterion) {
    let (scene, cams) = poster_fixture(2000, 128);
    c.bench_function("harvest_records_16_cams", |b| {
        b.iter(|| harvest_records(&scene, &cams, 0.05).unwrap())
    });
    let cfg = TrainConfig {
        iterations: 100,
        ..TrainConfig::default()
    };
    c.bench_function("train_100_iters", |b| {
        b.iter(|| {
            let mut s = scene.clone();
            train(&mut s, &cams, &cfg).unwrap()
        })
    });
}

fn bench_ause(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let n = 128 * 128;
    let errors: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    let uncert: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    c.bench_function("ause_128x128", |b| b.iter(|| ause(&errors, &uncert).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench_render, bench_train, bench_ause
}
criterion_main!(benches);
