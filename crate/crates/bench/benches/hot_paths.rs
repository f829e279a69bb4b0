use bapi_bench::fitted_model;
use bapi_core::acquisition::{greedy_append, qei, base_samples, AcqOptions, CandidateDomain, FantasyBatch};
use bapi_core::monotonic::{MonotoneGp, MonotoneSettings};
use bapi_core::surrogate::Surrogate;
use bapi_core::Query;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn posterior(c: &mut Criterion) {
    let mut g = c.benchmark_group("gp_posterior");
    for n in [5, 15, 30] {
        let model = fitted_model(n, 3).unwrap();
        let z = Query::new(vec![0.4, 0.5, 0.6], 0.7);
        g.bench_with_input(BenchmarkId::from_parameter(n * 3), &model, |b, m| b.iter(|| m.posterior(black_box(&z))));
    }
    g.finish();
}

fn constrained(c: &mut Criterion) {
    let model = fitted_model(10, 3).unwrap();
    let mono = MonotoneGp::new(model, MonotoneSettings::default()).unwrap();
    let z = Query::new(vec![0.4, 0.5, 0.6], 0.7);
    c.bench_function("constrained_predict", |b| b.iter(|| mono.predict(black_box(&z)).unwrap()));
}

fn batch_ei(c: &mut Criterion) {
    let model = fitted_model(10, 3).unwrap();
    let base = base_samples(128, 4, 0);
    let batch: Vec<Query> = (0..4).map(|i| Query::new(vec![0.2 * i as f64, 0.5, 0.3], 0.5)).collect();
    c.bench_function("qei_q4_mc128", |b| b.iter(|| qei(&model, black_box(&batch), 0.8, &base).unwrap()));
}

fn append(c: &mut Criterion) {
    let model = fitted_model(10, 3).unwrap();
    let mut batch = FantasyBatch::new(0.8, 128, 4, 0).unwrap();
    batch.push(Query::new(vec![0.3, 0.3, 0.3], 0.5)).unwrap();
    let domain = CandidateDomain::Continuous { dim: 3 };
    let opts = AcqOptions::default();
    let mut g = c.benchmark_group("greedy_append");
    g.sample_size(10);
    g.bench_function("continuous_q2", |b| b.iter(|| greedy_append(&model, &batch, &domain, 0.5, &opts).unwrap()));
    g.finish();
}

criterion_group!(benches, posterior, constrained, batch_ei, append);
criterion_main!(benches);
