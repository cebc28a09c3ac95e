//! Parallel vs single-threaded throughput of the Monte Carlo and grid-search kernels.
//! Every kernel runs inside a one-thread rayon pool and inside the default pool;
//! both produce bit-identical results.

use capex::numeric::{grid_search_n, verify_constraint, GridSpec};
use capex::stochastic::{constraint_samples, sample_pair, upper_quantile_mc};
use capex::{CapacityPlan, RandomVariable, ScenarioParams};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rayon::ThreadPool;

const N: usize = 1_000_000;

fn params() -> ScenarioParams {
    ScenarioParams {
        horizon: 30.0,
        rho: 0.05,
        kappa: 1.0,
        fixed_cost: 0.0,
        e_f: 0.7,
        e_i: 0.0,
        fossil_capacity: 2000.0,
        target: 13125.0,
        epsilon: 0.2,
        xi_max: 2000.0,
        demand: RandomVariable::uniform(1000.0, 1500.0).unwrap(),
        capacity_factor: RandomVariable::uniform(0.5, 1.0).unwrap(),
    }
}

fn pools() -> Vec<(&'static str, ThreadPool)> {
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let all = rayon::ThreadPoolBuilder::new().build().unwrap();
    vec![("1-thread", single), ("all-threads", all)]
}

fn monte_carlo(c: &mut Criterion) {
    let p = params();
    let plan = CapacityPlan::new(0.0, &[(10.0, 1634.65)]).unwrap();
    let mut group = c.benchmark_group("monte_carlo");
    group.throughput(Throughput::Elements(N as u64));
    group.sample_size(20);
    for (name, pool) in pools() {
        group.bench_with_input(BenchmarkId::new("sample_pair", name), &pool, |b, pool| {
            b.iter(|| pool.install(|| sample_pair(&p.demand, &p.capacity_factor, 1, N).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("quantile", name), &pool, |b, pool| {
            b.iter(|| {
                pool.install(|| {
                    let y = constraint_samples(&p.demand, &p.capacity_factor, p.horizon, p.target, p.e_f, 1, N).unwrap();
                    upper_quantile_mc(&y, p.epsilon).unwrap()
                })
            })
        });
        group.bench_with_input(BenchmarkId::new("verify", name), &pool, |b, pool| {
            b.iter(|| pool.install(|| verify_constraint(&plan, &p, N, 1).unwrap()))
        });
    }
    group.finish();
}

fn grid_search(c: &mut Criterion) {
    let p = params();
    let z = 32_693.024_198_872_12;
    let mut group = c.benchmark_group("grid_search");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_with_input(BenchmarkId::new("two_interventions", name), &pool, |b, pool| {
            b.iter(|| pool.install(|| grid_search_n(z, 2, &p, &GridSpec { t_points: 301, xi_points: 50 }).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("three_interventions", name), &pool, |b, pool| {
            b.iter(|| pool.install(|| grid_search_n(z, 3, &p, &GridSpec { t_points: 61, xi_points: 20 }).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, monte_carlo, grid_search);
criterion_main!(benches);
