use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use partlin_bench::{config, fixture, SIZES};
use partlin_core::applications::BenchmarkObjective;
use partlin_core::{solve_adaptive, solve_classic_cg, Error};

fn solvers(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_f1");
    group.sample_size(10);
    let cfg = config();
    for (dim, blocks) in SIZES {
        let (problem, x0) = fixture(dim, blocks, BenchmarkObjective::F1);
        let id = format!("{dim}x{blocks}");
        group.bench_with_input(BenchmarkId::new("acgm", &id), &x0, |b, x0| {
            b.iter(|| {
                solve_adaptive(&problem, black_box(x0), &cfg)
                    .or_else(Error::into_trace)
                    .unwrap()
            })
        });
        group.bench_with_input(BenchmarkId::new("cgm", &id), &x0, |b, x0| {
            b.iter(|| {
                solve_classic_cg(&problem, black_box(x0), &cfg)
                    .or_else(Error::into_trace)
                    .unwrap()
            })
        });
    }
    group.finish();
}

fn gap(c: &mut Criterion) {
    let mut group = c.benchmark_group("total_gap");
    for (dim, blocks) in SIZES {
        let (problem, x0) = fixture(dim, blocks, BenchmarkObjective::F1PlusF2);
        group.bench_with_input(BenchmarkId::from_parameter(format!("{dim}x{blocks}")), &x0, |b, x| {
            b.iter(|| problem.total_gap(black_box(x)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, solvers, gap);
criterion_main!(benches);
