//! Sequential versus rayon execution of the data-parallel kernels.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use csflab_core::critical::{track_paths, PointKind};
use csflab_core::exact::ExactFamily;
use csflab_core::flow::{FlowMode, FlowTrajectory};
use csflab_core::gaussian::{entropy, monotonicity_report, EntropySearch};
use csflab_core::geometry::SpacingPolicy;
use csflab_core::par::Exec;

const MODES: [(&str, Exec); 2] = [
    ("sequential", Exec::Sequential),
    ("parallel", Exec::Parallel),
];

fn clip_trajectory() -> FlowTrajectory {
    let taus: Vec<f64> = (0..=16).map(|k| -9.0 + 0.25 * k as f64).collect();
    ExactFamily::PaperClip
        .trajectory(
            &taus,
            FlowMode::Rescaled,
            &SpacingPolicy::Uniform { n: 600 },
        )
        .unwrap()
}

fn bench_entropy(c: &mut Criterion) {
    let curve = ExactFamily::PaperClip
        .sample_rescaled(-3.0, &SpacingPolicy::Uniform { n: 400 })
        .unwrap();
    let mut g = c.benchmark_group("entropy");
    g.sample_size(10);
    for (name, exec) in MODES {
        let search = EntropySearch {
            exec,
            ..EntropySearch::default()
        };
        g.bench_with_input(BenchmarkId::from_parameter(name), &search, |b, s| {
            b.iter(|| entropy(black_box(&curve), s).unwrap())
        });
    }
    g.finish();
}

fn bench_trajectory(c: &mut Criterion) {
    let traj = clip_trajectory();
    let mut g = c.benchmark_group("monotonicity_report");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(name, |b| {
            b.iter(|| monotonicity_report(black_box(&traj), exec).unwrap())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("track_paths");
    for (name, exec) in MODES {
        g.bench_function(name, |b| {
            b.iter(|| track_paths(black_box(&traj), PointKind::Knuckle, None, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench_entropy, bench_trajectory);
criterion_main!(benches);
