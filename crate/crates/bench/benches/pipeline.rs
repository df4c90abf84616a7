//! End-to-end benchmarks: data generation, a training epoch, and one
//! closed-loop evaluation pass at reduced scale.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use beamcast_core::sff::{train_sff, SffHyper};
use beamcast_core::sim::{DatasetSource, SimConfig};
use beamcast_core::timeseries::{generate_synthetic, make_windows, SyntheticSpec};

fn small_spec() -> SyntheticSpec {
    SyntheticSpec {
        n_beams: 2,
        n_days: 10,
        ..SyntheticSpec::default()
    }
}

fn bench_generation(c: &mut Criterion) {
    let spec = SyntheticSpec::default();
    c.bench_function("generate_synthetic_6x38d", |b| {
        b.iter(|| generate_synthetic(black_box(&spec), 42).unwrap())
    });
}

fn bench_training_epoch(c: &mut Criterion) {
    let dataset = generate_synthetic(&small_spec(), 42).unwrap();
    let windows = make_windows(&dataset, 48, 24, 12).unwrap();
    let hyper = SffHyper {
        epochs: 1,
        hidden_dims: vec![32],
        ..SffHyper::new(42)
    };
    c.bench_function("sff_train_epoch_small", |b| {
        b.iter(|| train_sff(black_box(&windows), &hyper, 24).unwrap())
    });
}

fn bench_simulation(c: &mut Criterion) {
    let mut cfg = SimConfig::synthetic_default(42);
    cfg.dataset = DatasetSource::Synthetic {
        spec: small_spec(),
        seed: 42,
    };
    cfg.context_len = 48;
    cfg.n_eval_days = 1;
    cfg.train_stride = 24;
    cfg.ecdf_samples = 200;
    cfg.sff.epochs = 2;
    cfg.sff.hidden_dims = vec![16];
    cfg.lstm.epochs = 1;
    cfg.lstm.hidden_dim = 8;
    c.bench_function("run_simulation_small", |b| {
        b.iter(|| beamcast_core::sim::run_simulation(black_box(&cfg)).unwrap())
    });
}

criterion_group!(benches, bench_generation, bench_training_epoch, bench_simulation);
criterion_main!(benches);
