use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use spreadlab::exact::exact_two_point;
use spreadlab::growth::{estimate_moments, EvolutionConfig};
use spreadlab::{build_kernel, Execution, KernelSpec};

fn frontier_moments(c: &mut Criterion) {
    let kernel = Arc::new(build_kernel(KernelSpec::uniform(3, 1)).unwrap());
    let cfg = EvolutionConfig::new(kernel, 1.0, 1.0, 30).with_samples(4096).with_seed(7);
    let n_list: Vec<u64> = (0..=30).step_by(5).collect();
    let mut group = c.benchmark_group("estimate_moments");
    group.sample_size(10);
    for (name, exec) in [("sequential", Execution::sequential()), ("parallel", Execution::available())] {
        group.bench_with_input(BenchmarkId::new(name, exec.worker_count()), &exec, |b, exec| {
            b.iter(|| estimate_moments(&cfg, &[0.0, 2.0], &n_list, exec).unwrap())
        });
    }
    group.finish();
}

fn exact_frontier(c: &mut Criterion) {
    let kernel = build_kernel(KernelSpec::uniform(1, 1)).unwrap();
    c.bench_function("exact_two_point d=1 L=1 n=8", |b| b.iter(|| exact_two_point(&kernel, 1.0, 1.0, 8).unwrap()));
}

criterion_group!(benches, frontier_moments, exact_frontier);
criterion_main!(benches);
