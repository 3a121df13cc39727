use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use dbx_core::dimension::{solve_samples, Family, FamilyParams};
use dbx_core::exec::Exec;
use dbx_core::ineq::verify_positivity_sweep;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn sampling(c: &mut Criterion) {
    let mut g = c.benchmark_group("solve_samples");
    g.sample_size(10);
    let p = FamilyParams { n: 3, depth_blocks: 6, family: Family::Full };
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new(name, 500), &exec, |b, &exec| {
            b.iter(|| solve_samples(&p, 500, 1, exec).unwrap())
        });
    }
    g.finish();
}

fn sweep(c: &mut Criterion) {
    let mut g = c.benchmark_group("positivity_sweep");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new(name, 200), &exec, |b, &exec| {
            b.iter(|| verify_positivity_sweep(2.0, 2.0, 200, 1, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, sampling, sweep);
criterion_main!(benches);
