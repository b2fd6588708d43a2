//! Single-threaded vs. default rayon pool on the hot paths.
//!
//! With `--no-default-features` the library takes its plain sequential
//! iterators and both variants measure the same code.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use d2d_cache::baselines::exhaustive_plan;
use d2d_cache::channel::build_delay_table;
use d2d_cache::experiments::{
    gen_instance, gen_system_topology, run_point, Algorithm, RunSettings,
};
use d2d_cache::greedy::plan_cache;
use d2d_cache::popularity::PopularityMode;
use d2d_cache::SystemConfig;
use rayon::{ThreadPool, ThreadPoolBuilder};

fn pools() -> Vec<(String, ThreadPool)> {
    let default = ThreadPoolBuilder::new().build().unwrap();
    let label = format!("pool-{}", default.current_num_threads());
    vec![
        ("sequential".to_string(), ThreadPoolBuilder::new().num_threads(1).build().unwrap()),
        (label, default),
    ]
}

fn greedy(c: &mut Criterion) {
    let mut group = c.benchmark_group("plan_cache");
    for (n, m, mu) in [(10, 30, 6), (25, 100, 30)] {
        let cfg = SystemConfig::with_size(n, m, mu);
        let (_, inst) = gen_instance(&cfg, PopularityMode::Independent, 500, 7).unwrap();
        for (name, pool) in pools() {
            group.bench_with_input(BenchmarkId::new(name, format!("{n}x{m}x{mu}")), &inst, |b, inst| {
                b.iter(|| pool.install(|| plan_cache(black_box(inst), mu).unwrap()))
            });
        }
    }
    group.finish();
}

fn delays(c: &mut Criterion) {
    let mut group = c.benchmark_group("build_delay_table");
    group.sample_size(10);
    let cfg = SystemConfig::default();
    let topo = gen_system_topology(&cfg, 7);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::new(name, "25 users x 500"), |b| {
            b.iter(|| pool.install(|| build_delay_table(black_box(&topo), &cfg, 500, 7).unwrap()))
        });
    }
    group.finish();
}

fn exhaustive(c: &mut Criterion) {
    let mut group = c.benchmark_group("exhaustive_plan");
    group.sample_size(10);
    let cfg = SystemConfig::with_size(4, 6, 2);
    let (_, inst) = gen_instance(&cfg, PopularityMode::Independent, 500, 7).unwrap();
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::new(name, "4x6x2"), |b| {
            b.iter(|| pool.install(|| exhaustive_plan(black_box(&inst), 2, u128::MAX).unwrap()))
        });
    }
    group.finish();
}

fn sweep_point(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_point");
    group.sample_size(10);
    let cfg = SystemConfig::with_size(10, 30, 6);
    let settings = RunSettings { mc_samples: 200, ..RunSettings::default() };
    let modes = [PopularityMode::Identical, PopularityMode::Independent];
    let algs = [Algorithm::Greedy, Algorithm::Naive];
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::new(name, "10 instances"), |b| {
            b.iter(|| pool.install(|| run_point(&cfg, &modes, &algs, 10, settings, 7).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, greedy, delays, exhaustive, sweep_point);
criterion_main!(benches);
