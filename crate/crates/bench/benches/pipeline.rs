use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use qic_bench::standard_fixture;
use qic_core::criteria::{qaic_ll, qtic_shadow};
use qic_core::fisher::bkm_j_model;
use qic_core::fit::{fit_ll, fit_shadow, loss_ll, loss_shadow, OptimizerConfig};
use qic_core::povm::Sampler;
use qic_core::qhbm::Order;
use qic_core::rng::rng_from_seed;
use qic_core::shadow::mean_snapshot_from_counts;
use qic_core::{QhbmModel, StateFamily};

fn models(c: &mut Criterion) {
    let f = standard_fixture(1000);
    let m2 = QhbmModel::m2();
    let mut t2 = f.theta.clone();
    t2.extend([0.0; 6]);
    c.bench_function("m1 evaluate gradient", |b| b.iter(|| f.truth.evaluate(&f.theta, Order::Gradient).unwrap()));
    c.bench_function("m2 evaluate hessian", |b| b.iter(|| m2.evaluate(&t2, Order::Hessian).unwrap()));
    c.bench_function("m1 bkm metric", |b| b.iter(|| bkm_j_model(&f.truth, &f.theta).unwrap()));
}

fn sampling(c: &mut Criterion) {
    let f = standard_fixture(1);
    let sampler = Sampler::new(&f.rho);
    c.bench_function("sample 1000 shots", |b| {
        b.iter_batched(|| rng_from_seed(3), |mut rng| sampler.sample_counts(1000, &mut rng), BatchSize::SmallInput)
    });
    c.bench_function("sampler setup", |b| b.iter(|| Sampler::new(&f.rho)));
}

fn losses(c: &mut Criterion) {
    let f = standard_fixture(1000);
    let rho_bar = mean_snapshot_from_counts(&f.counts).unwrap();
    c.bench_function("shadow loss m1", |b| b.iter(|| loss_shadow(&f.truth, &f.theta, &rho_bar).unwrap()));
    c.bench_function("likelihood loss m1", |b| b.iter(|| loss_ll(&f.truth, &f.theta, &f.counts).unwrap()));
}

fn fits(c: &mut Criterion) {
    let f = standard_fixture(1000);
    let rho_bar = mean_snapshot_from_counts(&f.counts).unwrap();
    let cfg = OptimizerConfig { restarts: 1, ..OptimizerConfig::default() };
    let mut g = c.benchmark_group("fit");
    g.sample_size(10);
    g.bench_function("shadow m1", |b| b.iter(|| fit_shadow(&f.truth, &rho_bar, &cfg, 4)));
    g.bench_function("likelihood m1", |b| b.iter(|| fit_ll(&f.truth, &f.counts, &cfg, 4).unwrap()));
    g.finish();
}

fn criteria(c: &mut Criterion) {
    let f = standard_fixture(1000);
    c.bench_function("qtic shadow m1", |b| b.iter(|| qtic_shadow(&f.truth, &f.theta, &f.counts, 1e-10).unwrap()));
    c.bench_function("qaic ll m1", |b| b.iter(|| qaic_ll(&f.truth, &f.theta, &f.counts, 1e-10).unwrap()));
}

criterion_group!(benches, models, sampling, losses, fits, criteria);
criterion_main!(benches);
