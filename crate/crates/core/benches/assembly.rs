//! Sequential versus parallel assembly.
//!
//! Each workload runs inside a one-thread pool and inside the default pool.
//! Building with `--no-default-features` swaps in the sequential fallback for
//! both, which isolates the cost of the parallel plumbing itself.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hesskit::gen;
use hesskit::{
    fd_hessian, hessian_total, multi_start, Configuration, FdParams, Graph, IntegratorParams, PotentialSpec,
};
use rayon::ThreadPool;

fn pools() -> Vec<(&'static str, ThreadPool)> {
    let seq = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let par = rayon::ThreadPoolBuilder::new().build().unwrap();
    vec![("1-thread", seq), ("all-threads", par)]
}

fn problem(n: usize, dim: usize) -> (PotentialSpec, Configuration) {
    let mut rng = gen::seeded(n as u64);
    let g = gen::connected_graph(&mut rng, n, 0.3).unwrap();
    let spec = gen::single_family_spec(&mut rng, g.clone(), dim, 0, 4.0).unwrap();
    let c = gen::configuration(&mut rng, n, dim, n as f64).unwrap();
    (spec, c)
}

fn bench_hessian(c: &mut Criterion) {
    let mut group = c.benchmark_group("hessian_total");
    for n in [16, 64, 256] {
        let (spec, conf) = problem(n, 3);
        for (name, pool) in pools() {
            group.bench_with_input(BenchmarkId::new(name, n), &n, |b, _| {
                pool.install(|| b.iter(|| hessian_total(&spec, &conf).unwrap()))
            });
        }
    }
    group.finish();
}

fn bench_fd(c: &mut Criterion) {
    let mut group = c.benchmark_group("fd_hessian");
    group.sample_size(10);
    for n in [8, 16, 32] {
        let (spec, conf) = problem(n, 2);
        for (name, pool) in pools() {
            group.bench_with_input(BenchmarkId::new(name, n), &n, |b, _| {
                pool.install(|| b.iter(|| fd_hessian(&spec, &conf, &FdParams::default()).unwrap()))
            });
        }
    }
    group.finish();
}

fn bench_multi_start(c: &mut Criterion) {
    let mut group = c.benchmark_group("multi_start");
    group.sample_size(10);
    let g = Graph::complete(4).unwrap();
    let mut rng = gen::seeded(9);
    let spec = gen::single_family_spec(&mut rng, g.clone(), 2, 0, 4.0).unwrap();
    let starts: Vec<Configuration> = (0..32)
        .map(|_| gen::configuration_with_lengths(&mut rng, &g, 2, 1.0, 0.3, 2.5).unwrap().unwrap())
        .collect();
    let params = IntegratorParams {
        dt: 5e-3,
        max_steps: 2_000,
        grad_tol: 0.0,
        stride: 100,
    };
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::new(name, starts.len()), |b| {
            pool.install(|| b.iter(|| multi_start(&spec, &starts, &params)))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_hessian, bench_fd, bench_multi_start);
criterion_main!(benches);
