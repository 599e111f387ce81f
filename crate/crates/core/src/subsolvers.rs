//! Exact linear-minimization oracles for the built-in block families.
//!
//! Every argmin scans left to right and keeps the first minimizer, so ties
//! resolve to the lowest index.

use std::fmt;
use std::sync::Arc;

use crate::blockcore::{dot, BlockTerm, LinearizedSolution};
use crate::error::{Error, Result};

/// Absolute tolerance on `tau(v) - lambda` in the elastic-demand root search.
pub const DEMAND_ROOT_TOL: f64 = 1e-10;
pub const DEMAND_MAX_HALVINGS: usize = 200;

fn argmin(g: &[f64]) -> (usize, f64) {
    let mut best = (0, g[0]);
    for (j, &v) in g.iter().enumerate().skip(1) {
        if v < best.1 {
            best = (j, v);
        }
    }
    best
}

/// Minimizes `<g, y>` over `{y >= 0, sum y = scale}`.
pub fn simplex_linearized_min(g: &[f64], scale: f64) -> LinearizedSolution {
    let (j, gj) = argmin(g);
    let mut y = vec![0.0; g.len()];
    y[j] = scale;
    LinearizedSolution {
        y,
        objective: scale * gj,
    }
}

/// Minimizes `<g, y>` over `{y >= 0, sum y <= cap}`.
pub fn capped_simplex_linearized_min(g: &[f64], cap: f64) -> LinearizedSolution {
    let (j, gj) = argmin(g);
    let mut y = vec![0.0; g.len()];
    if gj >= 0.0 {
        return LinearizedSolution { y, objective: 0.0 };
    }
    y[j] = cap;
    LinearizedSolution { y, objective: cap * gj }
}

/// Minimizes `<g, y> + sum_j w_j |y_j|` over the box `[lower, upper]`.
///
/// Each coordinate is piecewise linear, so its minimum sits at a bound or at
/// the kink `0` when the kink lies inside the box.
pub fn box_l1_linearized_min(g: &[f64], lower: &[f64], upper: &[f64], weights: &[f64]) -> LinearizedSolution {
    let mut y = Vec::with_capacity(g.len());
    let mut objective = 0.0;
    for j in 0..g.len() {
        let cost = |v: f64| g[j] * v + weights[j] * v.abs();
        let mut best = (lower[j], cost(lower[j]));
        let mut consider = |v: f64| {
            let c = cost(v);
            if c < best.1 {
                best = (v, c);
            }
        };
        if lower[j] < 0.0 && 0.0 < upper[j] {
            consider(0.0);
        }
        consider(upper[j]);
        y.push(best.0);
        objective += best.1;
    }
    LinearizedSolution { y, objective }
}

/// Standard simplex `{y >= 0, sum y = scale}` with `h = 0`.
#[derive(Debug, Clone)]
pub struct SimplexBlock {
    dim: usize,
    scale: f64,
}

impl SimplexBlock {
    pub fn new(dim: usize, scale: f64) -> Self {
        assert!(dim > 0 && scale > 0.0, "simplex needs dim > 0 and scale > 0");
        Self { dim, scale }
    }

    /// The barycenter `(scale / dim) e`.
    pub fn center(&self) -> Vec<f64> {
        vec![self.scale / self.dim as f64; self.dim]
    }
}

impl BlockTerm for SimplexBlock {
    fn dim(&self) -> usize {
        self.dim
    }

    fn solve_linearized(&self, g: &[f64]) -> Result<LinearizedSolution> {
        Ok(simplex_linearized_min(g, self.scale))
    }

    fn diameter(&self) -> f64 {
        if self.dim == 1 {
            0.0
        } else {
            self.scale * std::f64::consts::SQRT_2
        }
    }

    fn contains(&self, y: &[f64], tol: f64) -> bool {
        y.len() == self.dim
            && y.iter().all(|&v| v >= -tol)
            && (y.iter().sum::<f64>() - self.scale).abs() <= tol * self.scale.max(1.0)
    }
}

/// `{y >= 0, sum y <= cap}` with `h = 0`.
#[derive(Debug, Clone)]
pub struct CappedSimplexBlock {
    dim: usize,
    cap: f64,
}

impl CappedSimplexBlock {
    pub fn new(dim: usize, cap: f64) -> Self {
        assert!(dim > 0 && cap > 0.0, "capped simplex needs dim > 0 and cap > 0");
        Self { dim, cap }
    }
}

impl BlockTerm for CappedSimplexBlock {
    fn dim(&self) -> usize {
        self.dim
    }

    fn solve_linearized(&self, g: &[f64]) -> Result<LinearizedSolution> {
        Ok(capped_simplex_linearized_min(g, self.cap))
    }

    fn diameter(&self) -> f64 {
        if self.dim == 1 {
            self.cap
        } else {
            self.cap * std::f64::consts::SQRT_2
        }
    }

    fn contains(&self, y: &[f64], tol: f64) -> bool {
        y.len() == self.dim
            && y.iter().all(|&v| v >= -tol)
            && y.iter().sum::<f64>() <= self.cap + tol * self.cap.max(1.0)
    }
}

/// Box `[lower, upper]` with an optional weighted l1 term `sum_j w_j |y_j|`.
#[derive(Debug, Clone)]
pub struct BoxBlock {
    lower: Vec<f64>,
    upper: Vec<f64>,
    weights: Vec<f64>,
}

impl BoxBlock {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let w = vec![0.0; lower.len()];
        Self::with_l1(lower, upper, w)
    }

    pub fn with_l1(lower: Vec<f64>, upper: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() || lower.len() != weights.len() {
            return Err(Error::DimensionMismatch(
                "box bounds and weights must share a nonzero length".into(),
            ));
        }
        if lower
            .iter()
            .zip(&upper)
            .any(|(l, u)| !l.is_finite() || !u.is_finite() || l > u)
        {
            return Err(Error::InvalidParameter("box needs finite lower <= upper".into()));
        }
        if weights.iter().any(|w| w.is_nan() || *w < 0.0) {
            return Err(Error::InvalidParameter("l1 weights must be nonnegative".into()));
        }
        Ok(Self { lower, upper, weights })
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }
}

impl BlockTerm for BoxBlock {
    fn dim(&self) -> usize {
        self.lower.len()
    }

    fn h_value(&self, y: &[f64]) -> f64 {
        y.iter().zip(&self.weights).map(|(v, w)| w * v.abs()).sum()
    }

    fn has_nonsmooth_term(&self) -> bool {
        self.weights.iter().any(|&w| w > 0.0)
    }

    fn solve_linearized(&self, g: &[f64]) -> Result<LinearizedSolution> {
        Ok(box_l1_linearized_min(g, &self.lower, &self.upper, &self.weights))
    }

    fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| (u - l).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    fn contains(&self, y: &[f64], tol: f64) -> bool {
        y.len() == self.lower.len()
            && y.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol)
    }
}

/// Inverse demand `tau(v)` of an origin/destination pair and its integral.
pub trait InverseDemand: Send + Sync + fmt::Debug {
    fn value(&self, v: f64) -> f64;

    /// `sigma(v) = int_0^v tau(s) ds`.
    fn integral(&self, v: f64) -> f64;
}

/// `tau(v) = intercept - slope * v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineDemand {
    pub intercept: f64,
    pub slope: f64,
}

impl InverseDemand for AffineDemand {
    fn value(&self, v: f64) -> f64 {
        self.intercept - self.slope * v
    }

    fn integral(&self, v: f64) -> f64 {
        self.intercept * v - 0.5 * self.slope * v * v
    }
}

/// Which branch of the elastic-demand procedure produced a solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DemandCase {
    /// `tau(0) <= lambda`: no demand.
    NoDemand,
    /// `tau(cap) >= lambda`: demand at its cap.
    AtCap,
    /// `tau(v) = lambda` for some interior `v`.
    Interior,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElasticDemandSolution {
    pub paths: Vec<f64>,
    pub demand: f64,
    /// Shortest path index.
    pub shortest: usize,
    /// Cost of the shortest path, the pair's multiplier.
    pub lambda: f64,
    pub case: DemandCase,
    /// `sum_p cost_p u_p - sigma(v)`.
    pub objective: f64,
}

/// Flows and demand of one O/D pair:
/// `W = {(u, v) : sum_p u_p = v, u >= 0, 0 <= v <= cap}` with the nonsmooth
/// term `-sigma(v)`. Coordinates are laid out as `[u_1, ..., u_k, v]`.
#[derive(Debug, Clone)]
pub struct ElasticDemandBlock {
    num_paths: usize,
    demand: Arc<dyn InverseDemand>,
    cap: f64,
}

impl ElasticDemandBlock {
    pub fn new(num_paths: usize, demand: Arc<dyn InverseDemand>, cap: f64) -> Result<Self> {
        if num_paths == 0 {
            return Err(Error::InvalidParameter("an O/D block needs at least one path".into()));
        }
        if !(cap >= 0.0 && cap.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "demand cap {cap} must be finite and >= 0"
            )));
        }
        if cap > 0.0 && demand.value(0.0) <= demand.value(cap) {
            return Err(Error::NonMonotoneDemand);
        }
        Ok(Self { num_paths, demand, cap })
    }

    pub fn num_paths(&self) -> usize {
        self.num_paths
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn demand(&self) -> &dyn InverseDemand {
        self.demand.as_ref()
    }

    /// `lambda` is the cost of the cheapest path plus whatever linear cost
    /// sits on the demand coordinate.
    fn demand_for(&self, lambda: f64) -> (f64, DemandCase) {
        let tau = &self.demand;
        if tau.value(0.0) <= lambda {
            return (0.0, DemandCase::NoDemand);
        }
        if tau.value(self.cap) >= lambda {
            return (self.cap, DemandCase::AtCap);
        }
        let (mut lo, mut hi) = (0.0, self.cap);
        let mut mid = 0.5 * (lo + hi);
        for _ in 0..DEMAND_MAX_HALVINGS {
            mid = 0.5 * (lo + hi);
            let t = tau.value(mid);
            if (t - lambda).abs() <= DEMAND_ROOT_TOL {
                break;
            }
            if t > lambda {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (mid, DemandCase::Interior)
    }

    fn solve(&self, path_costs: &[f64], demand_cost: f64) -> Result<ElasticDemandSolution> {
        if path_costs.len() != self.num_paths {
            return Err(Error::DimensionMismatch(format!(
                "{} path costs for {} paths",
                path_costs.len(),
                self.num_paths
            )));
        }
        if path_costs.iter().any(|c| !c.is_finite()) || !demand_cost.is_finite() {
            return Err(Error::InvalidParameter("path costs must be finite".into()));
        }
        let (shortest, cheapest) = argmin(path_costs);
        let lambda = cheapest + demand_cost;
        let (demand, case) = self.demand_for(lambda);
        let mut paths = vec![0.0; self.num_paths];
        paths[shortest] = demand;
        let objective = lambda * demand - self.demand.integral(demand);
        Ok(ElasticDemandSolution {
            paths,
            demand,
            shortest,
            lambda,
            case,
            objective,
        })
    }
}

/// Minimizes `sum_p cost_p u_p - sigma(v)` over the pair's feasible set.
pub fn elastic_demand_block_min(path_costs: &[f64], block: &ElasticDemandBlock) -> Result<ElasticDemandSolution> {
    block.solve(path_costs, 0.0)
}

impl BlockTerm for ElasticDemandBlock {
    fn dim(&self) -> usize {
        self.num_paths + 1
    }

    fn h_value(&self, y: &[f64]) -> f64 {
        -self.demand.integral(y[self.num_paths])
    }

    fn has_nonsmooth_term(&self) -> bool {
        true
    }

    fn solve_linearized(&self, g: &[f64]) -> Result<LinearizedSolution> {
        let k = self.num_paths;
        let sol = self.solve(&g[..k], g[k])?;
        let mut y = sol.paths;
        y.push(sol.demand);
        let objective = dot(g, &y) + self.h_value(&y);
        Ok(LinearizedSolution { y, objective })
    }

    fn diameter(&self) -> f64 {
        self.cap * std::f64::consts::SQRT_2
    }

    fn contains(&self, y: &[f64], tol: f64) -> bool {
        if y.len() != self.num_paths + 1 {
            return false;
        }
        let (u, v) = (&y[..self.num_paths], y[self.num_paths]);
        let scale = self.cap.max(1.0);
        u.iter().all(|&p| p >= -tol)
            && v >= -tol
            && v <= self.cap + tol * scale
            && (u.iter().sum::<f64>() - v).abs() <= tol * scale
    }
}
