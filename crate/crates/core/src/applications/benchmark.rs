//! The quadratic test functions over products of standard simplices.
//!
//! `f1(x) = 0.5 <Px, x> - <q, x>` with, for 1-based indices,
//! `p_ij = sin(i) cos(j)` above the diagonal, `sin(j) cos(i)` below it and
//! `sum_{s != i} |p_is| + 1` on it, and `q_j = sin(j) / j`.
//! `f2(x) = 1 / (<c, x> + tau)` with `c_i = 2 + sin(i)` and `tau = 5`.

use std::sync::Arc;

use crate::blockcore::{dot, BlockPartition, BlockTerm, BlockVector, CompositeProblem, SmoothFunction};
use crate::error::{Error, Result};
use crate::subsolvers::SimplexBlock;

pub const F2_SHIFT: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchmarkObjective {
    F1,
    F1PlusF2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchmarkSpec {
    /// Total dimension `N`.
    pub dimension: usize,
    /// Number of blocks `n`; each block has `N / n` coordinates.
    pub blocks: usize,
    pub objective: BenchmarkObjective,
}

impl BenchmarkSpec {
    pub fn new(dimension: usize, blocks: usize, objective: BenchmarkObjective) -> Self {
        Self {
            dimension,
            blocks,
            objective,
        }
    }

    pub fn block_size(&self) -> usize {
        self.dimension / self.blocks
    }

    fn validate(&self) -> Result<()> {
        if self.blocks == 0 || self.dimension == 0 || !self.dimension.is_multiple_of(self.blocks) {
            return Err(Error::DimensionMismatch(format!(
                "N = {} is not a positive multiple of n = {}",
                self.dimension, self.blocks
            )));
        }
        Ok(())
    }
}

/// Row-major `N x N` matrix `P`.
pub fn benchmark_matrix(dim: usize) -> Vec<f64> {
    let mut p = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            if i == j {
                continue;
            }
            let (lo, hi) = if i < j { (i + 1, j + 1) } else { (j + 1, i + 1) };
            p[i * dim + j] = (lo as f64).sin() * (hi as f64).cos();
        }
        let off: f64 = (0..dim).filter(|&s| s != i).map(|s| p[i * dim + s].abs()).sum();
        p[i * dim + i] = off + 1.0;
    }
    p
}

pub fn benchmark_linear_term(dim: usize) -> Vec<f64> {
    (1..=dim).map(|j| (j as f64).sin() / j as f64).collect()
}

pub fn benchmark_f2_weights(dim: usize) -> Vec<f64> {
    (1..=dim).map(|i| 2.0 + (i as f64).sin()).collect()
}

#[derive(Debug, Clone)]
pub struct QuadraticBenchmark {
    dim: usize,
    p: Vec<f64>,
    q: Vec<f64>,
    /// `(c, tau)` of the `f2` term when present.
    reciprocal: Option<(Vec<f64>, f64)>,
}

impl QuadraticBenchmark {
    pub fn new(dim: usize, objective: BenchmarkObjective) -> Self {
        let p = benchmark_matrix(dim);
        // Gershgorin: every row has diagonal margin 1, so P is positive definite
        for i in 0..dim {
            let off: f64 = (0..dim).filter(|&j| j != i).map(|j| p[i * dim + j].abs()).sum();
            assert!(p[i * dim + i] - off > 0.0, "row {i} of P is not diagonally dominant");
        }
        let reciprocal = match objective {
            BenchmarkObjective::F1 => None,
            BenchmarkObjective::F1PlusF2 => {
                let c = benchmark_f2_weights(dim);
                // <c, x> + tau >= tau > 0 on nonnegative x
                assert!(c.iter().all(|&v| v >= 1.0));
                Some((c, F2_SHIFT))
            }
        };
        Self {
            dim,
            p,
            q: benchmark_linear_term(dim),
            reciprocal,
        }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.p[i * self.dim..(i + 1) * self.dim]
    }

    /// Upper bounds on the partial Lipschitz constants: the Frobenius norm of
    /// the diagonal block of `P`, plus `2 |c_i|^2 / tau^3` for `f2`.
    pub fn block_lipschitz(&self, partition: &BlockPartition) -> Vec<f64> {
        (0..partition.num_blocks())
            .map(|b| {
                let r = partition.range(b);
                let mut fro = 0.0;
                for i in r.clone() {
                    for j in r.clone() {
                        fro += self.p[i * self.dim + j].powi(2);
                    }
                }
                let mut l = fro.sqrt();
                if let Some((c, tau)) = &self.reciprocal {
                    let cn: f64 = c[r].iter().map(|v| v * v).sum();
                    l += 2.0 * cn / tau.powi(3);
                }
                l
            })
            .collect()
    }
}

impl SmoothFunction for QuadraticBenchmark {
    fn value(&self, x: &BlockVector) -> f64 {
        let x = x.as_slice();
        let quad: f64 = (0..self.dim).map(|i| x[i] * dot(self.row(i), x)).sum();
        let mut v = 0.5 * quad - dot(&self.q, x);
        if let Some((c, tau)) = &self.reciprocal {
            v += 1.0 / (dot(c, x) + tau);
        }
        v
    }

    fn partial_gradient(&self, x: &BlockVector, block: usize) -> Vec<f64> {
        let r = x.partition().range(block);
        let xs = x.as_slice();
        let scale = self.reciprocal.as_ref().map(|(c, tau)| {
            let s = dot(c, xs) + tau;
            -1.0 / (s * s)
        });
        r.map(|i| {
            let mut g = dot(self.row(i), xs) - self.q[i];
            if let (Some(k), Some((c, _))) = (scale, &self.reciprocal) {
                g += k * c[i];
            }
            g
        })
        .collect()
    }
}

/// Builds the benchmark over `n` standard simplices in `R^(N/n)`.
pub fn build_benchmark(spec: &BenchmarkSpec) -> Result<CompositeProblem> {
    spec.validate()?;
    let t = spec.block_size();
    let partition = Arc::new(BlockPartition::uniform(spec.blocks, t)?);
    let f = QuadraticBenchmark::new(spec.dimension, spec.objective);
    let lipschitz = f.block_lipschitz(&partition);
    let terms: Vec<Box<dyn BlockTerm>> = (0..spec.blocks)
        .map(|_| Box::new(SimplexBlock::new(t, 1.0)) as _)
        .collect();
    CompositeProblem::new(partition, f, terms)?
        .with_lipschitz(lipschitz)
        .map(CompositeProblem::declare_convex)
}

/// The common start point `(1/t) e`.
pub fn benchmark_start(problem: &CompositeProblem) -> BlockVector {
    let p = problem.partition().clone();
    let data = (0..p.num_blocks())
        .flat_map(|i| vec![1.0 / p.size(i) as f64; p.size(i)])
        .collect();
    BlockVector::new(p, data).expect("start point matches the partition")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_entries_follow_the_formula() {
        let p = benchmark_matrix(4);
        assert_eq!(p[1], 1f64.sin() * 2f64.cos());
        assert_eq!(p[4], 1f64.sin() * 2f64.cos());
        assert_eq!(p[2 * 4 + 3], 3f64.sin() * 4f64.cos());
        assert_eq!(p[3 * 4 + 1], 2f64.sin() * 4f64.cos());
        let off0 = p[1].abs() + p[2].abs() + p[3].abs();
        assert_eq!(p[0], off0 + 1.0);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(p[i * 4 + j], p[j * 4 + i]);
            }
        }
        assert_eq!(benchmark_linear_term(3)[2], 3f64.sin() / 3.0);
        assert_eq!(benchmark_f2_weights(2)[1], 2.0 + 2f64.sin());
    }

    #[test]
    fn bad_partition_is_rejected() {
        let spec = BenchmarkSpec::new(10, 3, BenchmarkObjective::F1);
        assert!(matches!(build_benchmark(&spec), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn start_point_is_barycenter() {
        let pb = build_benchmark(&BenchmarkSpec::new(10, 5, BenchmarkObjective::F1)).unwrap();
        let x = benchmark_start(&pb);
        assert_eq!(x.as_slice(), &[0.5; 10]);
        pb.check_feasible(&x).unwrap();
    }

    #[test]
    fn vertex_value_by_hand() {
        // x = e_1 in each block of size 2: coordinates 0 and 2 are one
        let pb = build_benchmark(&BenchmarkSpec::new(4, 2, BenchmarkObjective::F1)).unwrap();
        let x = pb.vector(vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        let p = benchmark_matrix(4);
        let expected = 0.5 * (p[0] + 2.0 * p[2] + p[2 * 4 + 2]) - (1f64.sin() + 3f64.sin() / 3.0);
        assert!((pb.mu_value(&x).unwrap() - expected).abs() < 1e-14);
    }
}
