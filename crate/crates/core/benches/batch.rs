//! Sequential versus data-parallel evaluation of a small VOI batch.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use trajvoi::degrade::DegradationSpec;
use trajvoi::infogain::{GpConfig, IntegrationConfig, DEFAULT_SIGMA0};
use trajvoi::par::Execution;
use trajvoi::pipeline::{build_cells, evaluate_cells, EvalSettings, PriorScenarios};
use trajvoi::{Measurement, Trajectory};

fn walks(count: usize, len: usize) -> Vec<Trajectory> {
    (0..count)
        .map(|i| {
            let points = (0..len)
                .map(|k| {
                    let t = 1_224_763_200.0 + 30.0 * k as f64;
                    let x = 4.0 * k as f64 + 25.0 * ((k + i) as f64 * 0.3).sin();
                    let y = -2.0 * k as f64 + 10.0 * i as f64;
                    Measurement::new(x, y, t, 3.0).unwrap()
                })
                .collect();
            Trajectory::new("bench", format!("w{i:03}"), points).unwrap()
        })
        .collect()
}

fn bench_batch(c: &mut Criterion) {
    let trajs = walks(8, 80);
    let specs = [
        DegradationSpec::Identity,
        DegradationSpec::Perturbation { total_noise_m: 100.0, seed: 7 },
        DegradationSpec::Subsampling { ratio: 0.4, seed: 7 },
    ];
    let priors = PriorScenarios {
        noise_priors: vec![],
        ratio_priors: vec![],
        ..PriorScenarios::default()
    };
    let cells = build_cells(trajs.len(), &specs, &priors);
    let integration = IntegrationConfig::default();
    let gp = GpConfig::default();
    let settings = EvalSettings {
        sigma0: DEFAULT_SIGMA0,
        integration: &integration,
        gp: &gp,
    };

    let mut group = c.benchmark_group("voi_batch");
    group.sample_size(10);
    let modes = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel { jobs: 0 })];
    for (name, exec) in modes {
        group.bench_with_input(BenchmarkId::new(name, cells.len()), &exec, |b, &exec| {
            b.iter(|| black_box(evaluate_cells(&trajs, &cells, settings, exec)))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_batch);
criterion_main!(benches);
