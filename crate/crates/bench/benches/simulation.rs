use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use genesis_bench::geometric_model;
use genesis_core::phase_type::{ph_fit, FitOptions, FitTarget};
use genesis_core::sim::{simulate_event_driven, simulate_reference_sde};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn event_driven(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate");
    group.sample_size(10);
    for n in [50, 200] {
        let model = geometric_model(n, 3, 3);
        let events = simulate_event_driven(&model, 20.0, 0).unwrap().events.len() as u64;
        group.throughput(Throughput::Elements(events));
        group.bench_with_input(BenchmarkId::new("event-driven", n), &model, |b, m| {
            b.iter(|| simulate_event_driven(m, 20.0, 0).unwrap())
        });
    }
    let small = geometric_model(8, 2, 2);
    group.bench_function("reference/8", |b| b.iter(|| simulate_reference_sde(&small, 5.0, 0).unwrap()));
    group.finish();
}

fn fit(c: &mut Criterion) {
    let opts = FitOptions {
        samples: 10_000,
        screen_samples: 2_000,
        max_iter: 100,
        ..FitOptions::default()
    };
    let target = FitTarget::LogNormal { mean: 1.0, variance: 2.0 };
    let mut group = c.benchmark_group("fit");
    group.sample_size(10);
    group.bench_function("lognormal/p6", |b| {
        b.iter(|| ph_fit(&target, 6, &opts, &mut ChaCha8Rng::seed_from_u64(0)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, event_driven, fit);
criterion_main!(benches);
