//! Fixtures shared by the criterion benchmarks.

use partlin_core::applications::{benchmark_start, build_benchmark, BenchmarkObjective, BenchmarkSpec};
use partlin_core::{BlockVector, CompositeProblem, SolverConfig};

/// Benchmark sizes exercised by the solver benches, as `(N, n)`.
pub const SIZES: [(usize, usize); 4] = [(20, 5), (50, 10), (100, 20), (100, 50)];

/// A benchmark problem together with its usual starting point.
pub fn fixture(dim: usize, blocks: usize, objective: BenchmarkObjective) -> (CompositeProblem, BlockVector) {
    let problem = build_benchmark(&BenchmarkSpec::new(dim, blocks, objective)).expect("valid benchmark size");
    let x0 = benchmark_start(&problem);
    (problem, x0)
}

/// Default settings with a budget small enough to keep one sample short.
pub fn config() -> SolverConfig {
    SolverConfig {
        max_iterations: 2_000,
        ..SolverConfig::default()
    }
}
