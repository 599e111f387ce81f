//! Penalty decomposition of block-angular linear programs.
//!
//! `max sum_i <c_i, x_i>` subject to `sum_i A_i x_i = b0` and `x_i in X_i` is
//! replaced by a sequence of problems
//! `min 0.5 tau |sum_i A_i x_i - b0|^2 - sum_i <c_i, x_i>` over the product of
//! the `X_i`, with `tau` growing between solves. The partial gradient is
//! `g_i = tau A_i^T r - c_i` with the residual `r = sum_j A_j x_j - b0`; the
//! objective keeps `r` cached and patches it block by block, so a step in one
//! block costs work proportional to that block only.

use std::sync::{Arc, Mutex};

use crate::blockcore::{dot, BlockPartition, BlockTerm, BlockVector, CompositeProblem, SmoothFunction};
use crate::error::{Error, Result};
use crate::solver::{solve_adaptive, RunTrace, SolverConfig};
use crate::subsolvers::{BoxBlock, SimplexBlock};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged matrix rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `out += scale * A v`.
    pub fn mul_add(&self, v: &[f64], scale: f64, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o += scale * dot(self.row(i), v);
        }
    }

    /// `A^T v`.
    pub fn transpose_mul(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, vi) in v.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += vi * a;
            }
        }
        out
    }

    /// Frobenius norm of `A^T A`.
    fn gram_frobenius(&self) -> f64 {
        let mut s = 0.0;
        for p in 0..self.cols {
            for q in 0..self.cols {
                let e: f64 = (0..self.rows)
                    .map(|i| self.data[i * self.cols + p] * self.data[i * self.cols + q])
                    .sum();
                s += e * e;
            }
        }
        s.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PenaltyBlockSet {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Simplex { dim: usize, scale: f64 },
}

impl PenaltyBlockSet {
    fn dim(&self) -> usize {
        match self {
            PenaltyBlockSet::Box { lower, .. } => lower.len(),
            PenaltyBlockSet::Simplex { dim, .. } => *dim,
        }
    }

    fn term(&self) -> Result<Box<dyn BlockTerm>> {
        Ok(match self {
            PenaltyBlockSet::Box { lower, upper } => Box::new(BoxBlock::new(lower.clone(), upper.clone())?),
            PenaltyBlockSet::Simplex { dim, scale } => Box::new(SimplexBlock::new(*dim, *scale)),
        })
    }

    fn center(&self) -> Vec<f64> {
        match self {
            PenaltyBlockSet::Box { lower, upper } => lower.iter().zip(upper).map(|(l, u)| 0.5 * (l + u)).collect(),
            PenaltyBlockSet::Simplex { dim, scale } => vec![scale / *dim as f64; *dim],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltySpec {
    pub prices: Vec<Vec<f64>>,
    pub coupling: Vec<Matrix>,
    pub resource: Vec<f64>,
    pub sets: Vec<PenaltyBlockSet>,
    pub tau: f64,
    /// Factor applied to `tau` between continuation solves.
    pub growth: f64,
}

impl PenaltySpec {
    fn validate(&self) -> Result<()> {
        let n = self.sets.len();
        if n == 0 || self.prices.len() != n || self.coupling.len() != n {
            return Err(Error::DimensionMismatch(
                "prices, coupling matrices and sets must agree in count".into(),
            ));
        }
        for i in 0..n {
            let l = self.sets[i].dim();
            if self.prices[i].len() != l || self.coupling[i].cols != l || self.coupling[i].rows != self.resource.len() {
                return Err(Error::DimensionMismatch(format!(
                    "block {i} has inconsistent dimensions"
                )));
            }
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("tau = {} must be positive", self.tau)));
        }
        Ok(())
    }

    pub fn with_tau(&self, tau: f64) -> Self {
        Self { tau, ..self.clone() }
    }

    /// `tau, tau g, tau g^2, ...`.
    pub fn schedule(&self, steps: usize) -> Vec<f64> {
        std::iter::successors(Some(self.tau), |t| Some(t * self.growth))
            .take(steps)
            .collect()
    }

    pub fn start_point(&self) -> Vec<f64> {
        self.sets.iter().flat_map(PenaltyBlockSet::center).collect()
    }

    /// `sum_i A_i x_i - b0`.
    pub fn residual(&self, x: &BlockVector) -> Vec<f64> {
        let mut r: Vec<f64> = self.resource.iter().map(|b| -b).collect();
        for (i, a) in self.coupling.iter().enumerate() {
            a.mul_add(x.block(i), 1.0, &mut r);
        }
        r
    }

    /// `sum_i <c_i, x_i>`.
    pub fn income(&self, x: &BlockVector) -> f64 {
        self.prices.iter().enumerate().map(|(i, c)| dot(c, x.block(i))).sum()
    }

    /// Gradient of block `i` computed from scratch.
    pub fn partial_gradient_direct(&self, x: &BlockVector, block: usize) -> Vec<f64> {
        let r = self.residual(x);
        let atr = self.coupling[block].transpose_mul(&r);
        atr.iter()
            .zip(&self.prices[block])
            .map(|(a, c)| self.tau * a - c)
            .collect()
    }
}

#[derive(Debug)]
struct ResidualCache {
    x: Vec<f64>,
    residual: Vec<f64>,
}

struct PenaltyObjective {
    coupling: Vec<Matrix>,
    prices: Vec<Vec<f64>>,
    tau: f64,
    cache: Mutex<ResidualCache>,
}

impl PenaltyObjective {
    /// Brings the cached residual to `x`, touching only blocks that moved.
    fn residual_at(&self, x: &BlockVector) -> Vec<f64> {
        let mut cache = self.cache.lock().unwrap();
        let p = x.partition();
        for b in 0..p.num_blocks() {
            let r = p.range(b);
            let new = x.block(b);
            if cache.x[r.clone()] == *new {
                continue;
            }
            let delta: Vec<f64> = new.iter().zip(&cache.x[r.clone()]).map(|(a, o)| a - o).collect();
            let ResidualCache { x: cx, residual } = &mut *cache;
            self.coupling[b].mul_add(&delta, 1.0, residual);
            cx[r].copy_from_slice(new);
        }
        cache.residual.clone()
    }
}

impl SmoothFunction for PenaltyObjective {
    fn value(&self, x: &BlockVector) -> f64 {
        let r = self.residual_at(x);
        let income: f64 = self.prices.iter().enumerate().map(|(i, c)| dot(c, x.block(i))).sum();
        0.5 * self.tau * dot(&r, &r) - income
    }

    fn partial_gradient(&self, x: &BlockVector, block: usize) -> Vec<f64> {
        let r = self.residual_at(x);
        let atr = self.coupling[block].transpose_mul(&r);
        atr.iter()
            .zip(&self.prices[block])
            .map(|(a, c)| self.tau * a - c)
            .collect()
    }
}

pub fn build_penalty_problem(spec: &PenaltySpec) -> Result<CompositeProblem> {
    spec.validate()?;
    let sizes: Vec<usize> = spec.sets.iter().map(PenaltyBlockSet::dim).collect();
    let partition = Arc::new(BlockPartition::new(sizes)?);
    let terms = spec
        .sets
        .iter()
        .map(PenaltyBlockSet::term)
        .collect::<Result<Vec<_>>>()?;
    let origin = vec![0.0; partition.total()];
    let residual = spec.resource.iter().map(|b| -b).collect();
    let objective = PenaltyObjective {
        coupling: spec.coupling.clone(),
        prices: spec.prices.clone(),
        tau: spec.tau,
        cache: Mutex::new(ResidualCache { x: origin, residual }),
    };
    let lipschitz = spec.coupling.iter().map(|a| spec.tau * a.gram_frobenius()).collect();
    CompositeProblem::new(partition, objective, terms)?
        .with_lipschitz(lipschitz)
        .map(CompositeProblem::declare_convex)
}

/// All partial gradients kept current under single-block steps through
/// `g_i(x + theta d) = g_i(x) + theta tau A_i^T A_s d_s`.
#[derive(Debug, Clone)]
pub struct IncrementalPenaltyGradients {
    spec: PenaltySpec,
    point: BlockVector,
    residual: Vec<f64>,
    gradients: Vec<Vec<f64>>,
}

impl IncrementalPenaltyGradients {
    pub fn new(spec: &PenaltySpec, point: BlockVector) -> Result<Self> {
        spec.validate()?;
        let residual = spec.residual(&point);
        let gradients = (0..spec.sets.len())
            .map(|i| spec.partial_gradient_direct(&point, i))
            .collect();
        Ok(Self {
            spec: spec.clone(),
            point,
            residual,
            gradients,
        })
    }

    /// Moves block `s` by `theta * d_s`.
    pub fn step(&mut self, block: usize, direction: &[f64], theta: f64) {
        let a_s = &self.spec.coupling[block];
        let mut shift = vec![0.0; a_s.rows];
        a_s.mul_add(direction, theta, &mut shift);
        for (r, s) in self.residual.iter_mut().zip(&shift) {
            *r += s;
        }
        for (i, g) in self.gradients.iter_mut().enumerate() {
            let delta = self.spec.coupling[i].transpose_mul(&shift);
            for (gi, d) in g.iter_mut().zip(delta) {
                *gi += self.spec.tau * d;
            }
        }
        for (x, d) in self.point.block_mut(block).iter_mut().zip(direction) {
            *x += theta * d;
        }
    }

    pub fn point(&self) -> &BlockVector {
        &self.point
    }

    pub fn residual(&self) -> &[f64] {
        &self.residual
    }

    pub fn gradient(&self, block: usize) -> &[f64] {
        &self.gradients[block]
    }
}

#[derive(Debug, Clone)]
pub struct ContinuationStep {
    pub tau: f64,
    pub point: BlockVector,
    pub residual_norm: f64,
    /// `sum_i <c_i, x_i>` at the solution.
    pub income: f64,
    pub trace: RunTrace,
}

/// Solves the penalty problem for each `tau` in turn, warm-starting every
/// solve at the previous solution.
pub fn penalty_continuation(spec: &PenaltySpec, taus: &[f64], config: &SolverConfig) -> Result<Vec<ContinuationStep>> {
    if taus
        .windows(2)
        .any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater))
    {
        return Err(Error::InvalidParameter("tau schedule must be increasing".into()));
    }
    let mut start = spec.start_point();
    let mut out = Vec::with_capacity(taus.len());
    for &tau in taus {
        let s = spec.with_tau(tau);
        let problem = build_penalty_problem(&s)?;
        let x0 = problem.vector(start)?;
        let trace = solve_adaptive(&problem, &x0, config)?;
        let r = s.residual(&trace.point);
        start = trace.point.as_slice().to_vec();
        out.push(ContinuationStep {
            tau,
            point: trace.point.clone(),
            residual_norm: dot(&r, &r).sqrt(),
            income: s.income(&trace.point),
            trace,
        });
    }
    Ok(out)
}
