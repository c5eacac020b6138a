use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mdim_core::covering::{separated_sum, spanning_sum, KernelConfig, Mode};
use mdim_core::cp::{critical_exponent, CpKind, CpSearch};
use mdim_core::q;
use mdim_core::systems::{sample_cloud, Potential, Scheme, ShiftSystem, SystemSpec};

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    vec![
        ("sequential", rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap()),
        ("parallel", rayon::ThreadPoolBuilder::new().build().unwrap()),
    ]
}

fn greedy_counts(c: &mut Criterion) {
    let sys = SystemSpec::Shift(ShiftSystem::grid(16, 24).unwrap());
    let cloud = sample_cloud(&sys, Scheme::UniformRandom, 600, 1).unwrap();
    let cfg = KernelConfig::default();
    let f = Potential::zero();
    let eps = q(1, 8);
    let mut g = c.benchmark_group("greedy_counts");
    g.sample_size(20);
    for (name, pool) in pools() {
        g.bench_with_input(BenchmarkId::new("separated", name), &pool, |b, pool| {
            b.iter(|| pool.install(|| separated_sum(&sys, &cloud.points, 4, &eps, &f, Mode::Greedy, &cfg).unwrap()))
        });
        g.bench_with_input(BenchmarkId::new("spanning", name), &pool, |b, pool| {
            b.iter(|| {
                pool.install(|| spanning_sum(&sys, &cloud.points, &cloud.points, 4, &eps, &f, Mode::Greedy, &cfg).unwrap())
            })
        });
    }
    g.finish();
}

fn cp_search(c: &mut Criterion) {
    let sys = SystemSpec::Shift(ShiftSystem::grid(8, 24).unwrap());
    let cloud = sample_cloud(&sys, Scheme::UniformRandom, 120, 2).unwrap();
    let cfg = KernelConfig::default();
    let search = CpSearch::default();
    let mut g = c.benchmark_group("critical_exponent");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_with_input(BenchmarkId::new("bowen", name), &pool, |b, pool| {
            b.iter(|| {
                pool.install(|| {
                    critical_exponent(&sys, &cloud, CpKind::Bowen, &q(1, 4), &Potential::zero(), (-4.0, 12.0), &search, Mode::Greedy, &cfg)
                        .unwrap()
                })
            })
        });
    }
    g.finish();
}

criterion_group!(benches, greedy_counts, cp_search);
criterion_main!(benches);
