use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lmpgnn::harness::{ExperimentSpec, MethodSpec, SyntheticSpec};
use lmpgnn::{run_experiment_with, ExecutionMode, FilterMethod, NoiseSpec};

fn spec(repetitions: usize) -> ExperimentSpec {
    let dataset = SyntheticSpec {
        nodes: 50,
        band: 8,
        timesteps: 120,
        seed: 3,
        ..SyntheticSpec::default()
    }
    .generate()
    .unwrap();
    let mut gnn = MethodSpec::gnn("lmp-gnn", 1.2, 0.2);
    gnn.eta = 1e-5;
    gnn.pretrain_epochs = 5;
    ExperimentSpec {
        name: "bench".into(),
        dataset: Arc::new(dataset),
        noise: NoiseSpec::sas(1.5, 0.1),
        observed_count: 30,
        train_prefix: 30,
        band_size: 8,
        methods: vec![
            MethodSpec::filter(FilterMethod::Glms, 0.2),
            MethodSpec::filter(FilterMethod::Glmp, 0.2).with_p(1.2),
            gnn,
        ],
        repetitions,
        base_seed: 7,
        trace_node: 0,
    }
}

fn repetitions(c: &mut Criterion) {
    let spec = spec(16);
    let mut group = c.benchmark_group("run_experiment");
    group.sample_size(10);
    for (name, mode) in [("Serial", ExecutionMode::Serial), ("Parallel", ExecutionMode::Parallel)] {
        group.bench_with_input(BenchmarkId::new(name, spec.repetitions), &mode, |b, &mode| {
            b.iter(|| run_experiment_with(black_box(&spec), mode).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, repetitions);
criterion_main!(benches);
