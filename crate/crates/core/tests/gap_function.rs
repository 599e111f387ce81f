use std::sync::Arc;

use partlin_core::applications::{benchmark_start, build_benchmark, BenchmarkObjective, BenchmarkSpec};
use partlin_core::subsolvers::BoxBlock;
use partlin_core::{BlockPartition, BlockTerm, BlockVector, CompositeProblem, SmoothFunction};
use proptest::prelude::*;

/// Benchmark data rebuilt from the definition, independent of the library.
fn reference_p(dim: usize) -> Vec<Vec<f64>> {
    let mut p = vec![vec![0.0; dim]; dim];
    for i in 1..=dim {
        for j in 1..=dim {
            p[i - 1][j - 1] = if i < j {
                (i as f64).sin() * (j as f64).cos()
            } else if i > j {
                (j as f64).sin() * (i as f64).cos()
            } else {
                0.0
            };
        }
    }
    for (i, row) in p.iter_mut().enumerate() {
        row[i] = row
            .iter()
            .enumerate()
            .filter(|&(s, _)| s != i)
            .map(|(_, v)| v.abs())
            .sum::<f64>()
            + 1.0;
    }
    p
}

fn reference_gradient(x: &[f64], with_f2: bool) -> Vec<f64> {
    let dim = x.len();
    let p = reference_p(dim);
    let mut g: Vec<f64> = (0..dim)
        .map(|i| (0..dim).map(|j| p[i][j] * x[j]).sum::<f64>() - ((i + 1) as f64).sin() / (i + 1) as f64)
        .collect();
    if with_f2 {
        let c: Vec<f64> = (1..=dim).map(|i| 2.0 + (i as f64).sin()).collect();
        let s: f64 = c.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + 5.0;
        for (gi, ci) in g.iter_mut().zip(&c) {
            *gi -= ci / (s * s);
        }
    }
    g
}

fn random_simplex_point(u: &[f64]) -> Vec<f64> {
    let e: Vec<f64> = u.iter().map(|v| -v.max(1e-300).ln()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

#[test]
fn block_gaps_match_grid_oracle_at_start() {
    // blocks of size 2: the simplex is the segment (s, 1 - s)
    let pb = build_benchmark(&BenchmarkSpec::new(10, 5, BenchmarkObjective::F1)).unwrap();
    let x = benchmark_start(&pb);
    let g = reference_gradient(x.as_slice(), false);
    for i in 0..5 {
        let (g0, g1) = (g[2 * i], g[2 * i + 1]);
        let (x0, x1) = (x.as_slice()[2 * i], x.as_slice()[2 * i + 1]);
        let oracle = (0..=10_000)
            .map(|k| {
                let s = k as f64 / 10_000.0;
                g0 * (x0 - s) + g1 * (x1 - (1.0 - s))
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let phi = pb.block_proposal(&x, i).unwrap().phi;
        assert!((phi - oracle).abs() <= 1e-6, "block {i}: {phi} vs {oracle}");
    }
}

#[test]
fn partial_gradients_match_reference_and_finite_differences() {
    for (objective, with_f2) in [(BenchmarkObjective::F1, false), (BenchmarkObjective::F1PlusF2, true)] {
        let pb = build_benchmark(&BenchmarkSpec::new(20, 5, objective)).unwrap();
        let x = pb
            .vector((0..20).map(|j| 0.05 + 0.1 * ((j * 7) % 4) as f64 / 3.0).collect())
            .unwrap();
        let reference = reference_gradient(x.as_slice(), with_f2);
        let g = pb.oracle().full_gradient(&x);
        let h = 1e-6;
        for (j, &r) in reference.iter().enumerate() {
            assert!((g.as_slice()[j] - r).abs() <= 1e-12);
            let mut up = x.clone();
            up.as_mut_slice()[j] += h;
            let mut dn = x.clone();
            dn.as_mut_slice()[j] -= h;
            let fd = (pb.mu_uncounted(&up) - pb.mu_uncounted(&dn)) / (2.0 * h);
            let rel = (fd - r).abs() / r.abs().max(1.0);
            assert!(rel <= 1e-5, "coordinate {j}: {fd} vs {r}");
        }
    }
}

/// `0.5 |x - a|^2`, whose unconstrained minimizer `a` lies inside the box.
struct ShiftedSquare(Vec<f64>);

impl SmoothFunction for ShiftedSquare {
    fn value(&self, x: &BlockVector) -> f64 {
        0.5 * x
            .as_slice()
            .iter()
            .zip(&self.0)
            .map(|(v, a)| (v - a).powi(2))
            .sum::<f64>()
    }

    fn partial_gradient(&self, x: &BlockVector, block: usize) -> Vec<f64> {
        let r = x.partition().range(block);
        x.as_slice()[r.clone()]
            .iter()
            .zip(&self.0[r])
            .map(|(v, a)| v - a)
            .collect()
    }
}

#[test]
fn gap_vanishes_at_separable_minimizer() {
    let a = vec![0.3, -0.7, 0.1, 0.9, -0.2, 0.45];
    let partition = Arc::new(BlockPartition::uniform(3, 2).unwrap());
    let terms: Vec<Box<dyn BlockTerm>> = (0..3)
        .map(|_| Box::new(BoxBlock::new(vec![-1.0; 2], vec![1.0; 2]).unwrap()) as _)
        .collect();
    let pb = CompositeProblem::new(partition, ShiftedSquare(a.clone()), terms).unwrap();
    let x = pb.vector(a).unwrap();
    assert!(pb.total_gap(&x).unwrap() <= 1e-8);
    let off = pb.vector(vec![0.3, -0.7, 0.1, 0.9, -0.2, 0.0]).unwrap();
    assert!(pb.total_gap(&off).unwrap() > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn gap_is_nonnegative_and_additive(u in proptest::collection::vec(1e-9f64..1.0, 20)) {
        let pb = build_benchmark(&BenchmarkSpec::new(20, 5, BenchmarkObjective::F1)).unwrap();
        let data: Vec<f64> = u.chunks(4).flat_map(random_simplex_point).collect();
        let x = pb.vector(data).unwrap();
        let props = pb.proposals(&x).unwrap();
        let total = pb.total_gap(&x).unwrap();
        prop_assert!(total >= -1e-9);
        prop_assert!(props.iter().all(|p| p.phi_raw >= -1e-9 && p.phi >= 0.0));
        let sum: f64 = props.iter().map(|p| p.phi).sum();
        prop_assert!((sum - total).abs() <= 1e-12);
    }

    #[test]
    fn gap_is_initial_descent_rate(u in proptest::collection::vec(1e-9f64..1.0, 10), block in 0usize..5) {
        // with h = 0 the directional derivative along y_s - x_s is -phi_s
        let pb = build_benchmark(&BenchmarkSpec::new(10, 5, BenchmarkObjective::F1PlusF2)).unwrap();
        let data: Vec<f64> = u.chunks(2).flat_map(random_simplex_point).collect();
        let x = pb.vector(data).unwrap();
        let p = pb.block_proposal(&x, block).unwrap();
        let lam = 1e-4;
        let z = partlin_core::apply_block_step(&x, block, &p.y, lam).unwrap();
        let decrease = pb.mu_uncounted(&x) - pb.mu_uncounted(&z);
        prop_assert!((decrease / lam - p.phi).abs() <= 1e-2 * p.phi.max(1.0));
    }
}
