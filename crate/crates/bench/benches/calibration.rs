use criterion::{criterion_group, criterion_main, Criterion};
use lbi::calibration::calibrate_null;
use lbi::multivariate::{normal_matrix, stat_gl, stat_lt, whiten, MultivariateSample};
use lbi::{Group, StatisticSpec, TestKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

fn null_calibration(c: &mut Criterion) {
    let mut group = c.benchmark_group("calibrate_null");
    group.sample_size(10);
    let skew = StatisticSpec::new(TestKind::Skew).build().unwrap();
    group.bench_function("skew/n20/10k", |b| b.iter(|| calibrate_null(&skew, 20, 1, 10_000, black_box(1))));
    let mvn = StatisticSpec::new(TestKind::Mvn).with_group(Group::Lt).build().unwrap();
    group.bench_function("mvn-lt/n20p3/10k", |b| b.iter(|| calibrate_null(&mvn, 20, 3, 10_000, black_box(1))));
    group.finish();
}

fn multivariate(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = MultivariateSample::new(normal_matrix(&mut rng, 200, 5)).unwrap();
    let w = whiten(&x).unwrap();
    c.bench_function("whiten/200x5", |b| b.iter(|| whiten(black_box(&x))));
    c.bench_function("stat_gl/200x5", |b| b.iter(|| stat_gl(black_box(&w))));
    c.bench_function("stat_lt/200x5", |b| b.iter(|| stat_lt(black_box(&w))));
}

criterion_group!(benches, null_calibration, multivariate);
criterion_main!(benches);
