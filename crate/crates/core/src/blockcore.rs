//! Block-structured vectors, the composite problem model and the gap function.
//!
//! A [`CompositeProblem`] describes `min f(x) + sum_i h_i(x_i)` over a
//! Cartesian product `X_1 x ... x X_n`. The smooth part `f` is reached only
//! through a [`CountingOracle`], so every partial-gradient evaluation is
//! accounted for; each factor `X_i` together with its convex term `h_i` is a
//! [`BlockTerm`] that can minimize a linear form plus `h_i` exactly.
//!
//! For a feasible `x` the block gap is
//! `phi_i(x) = <g_i(x), x_i - y_i> + h_i(x_i) - h_i(y_i)` where `y_i`
//! minimizes `<g_i(x), y> + h_i(y)` over `X_i`. It is nonnegative and vanishes
//! on every block exactly at stationary points.

use std::fmt;
use std::ops::Range;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};

/// Tolerance of the membership predicates.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// A raw gap below this value means the subsolver answer was not optimal.
pub const PHI_FAILURE_THRESHOLD: f64 = -1e-9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl BlockPartition {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::DimensionMismatch("partition needs at least one block".into()));
        }
        if let Some(i) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::DimensionMismatch(format!("block {i} is empty")));
        }
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        offsets.push(0);
        for s in &sizes {
            offsets.push(offsets.last().unwrap() + s);
        }
        Ok(Self { sizes, offsets })
    }

    /// `blocks` blocks of `size` coordinates each.
    pub fn uniform(blocks: usize, size: usize) -> Result<Self> {
        Self::new(vec![size; blocks])
    }

    pub fn num_blocks(&self) -> usize {
        self.sizes.len()
    }

    /// Total dimension `N`.
    pub fn total(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn size(&self, block: usize) -> usize {
        self.sizes[block]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn range(&self, block: usize) -> Range<usize> {
        self.offsets[block]..self.offsets[block + 1]
    }
}

/// A point of `R^N` viewed block by block.
#[derive(Clone, PartialEq)]
pub struct BlockVector {
    data: Vec<f64>,
    partition: Arc<BlockPartition>,
}

impl BlockVector {
    pub fn new(partition: Arc<BlockPartition>, data: Vec<f64>) -> Result<Self> {
        if data.len() != partition.total() {
            return Err(Error::DimensionMismatch(format!(
                "vector has length {}, partition expects {}",
                data.len(),
                partition.total()
            )));
        }
        Ok(Self { data, partition })
    }

    pub fn zeros(partition: Arc<BlockPartition>) -> Self {
        let data = vec![0.0; partition.total()];
        Self { data, partition }
    }

    /// Builds a vector from per-block pieces.
    pub fn from_blocks(partition: Arc<BlockPartition>, blocks: &[Vec<f64>]) -> Result<Self> {
        if blocks.len() != partition.num_blocks() {
            return Err(Error::DimensionMismatch(format!(
                "{} blocks given, partition has {}",
                blocks.len(),
                partition.num_blocks()
            )));
        }
        let mut data = Vec::with_capacity(partition.total());
        for (i, b) in blocks.iter().enumerate() {
            if b.len() != partition.size(i) {
                return Err(Error::DimensionMismatch(format!(
                    "block {i} has length {}, expected {}",
                    b.len(),
                    partition.size(i)
                )));
            }
            data.extend_from_slice(b);
        }
        Ok(Self { data, partition })
    }

    pub fn partition(&self) -> &Arc<BlockPartition> {
        &self.partition
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.data[self.partition.range(i)]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        let r = self.partition.range(i);
        &mut self.data[r]
    }

    pub fn dot(&self, other: &BlockVector) -> f64 {
        dot(&self.data, &other.data)
    }
}

impl fmt::Debug for BlockVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let blocks: Vec<&[f64]> = (0..self.partition.num_blocks()).map(|i| self.block(i)).collect();
        f.debug_tuple("BlockVector").field(&blocks).finish()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The smooth part `f` of a composite problem.
pub trait SmoothFunction: Send + Sync {
    fn value(&self, x: &BlockVector) -> f64;

    /// Gradient of `f` restricted to the coordinates of `block`.
    fn partial_gradient(&self, x: &BlockVector, block: usize) -> Vec<f64>;

    fn full_gradient(&self, x: &BlockVector) -> BlockVector {
        let p = x.partition().clone();
        let mut data = Vec::with_capacity(p.total());
        for i in 0..p.num_blocks() {
            data.extend(self.partial_gradient(x, i));
        }
        BlockVector { data, partition: p }
    }
}

/// Wraps a [`SmoothFunction`] and counts value and partial-gradient calls.
pub struct CountingOracle {
    inner: Box<dyn SmoothFunction>,
    value_calls: AtomicU64,
    partial_gradient_calls: AtomicU64,
}

impl CountingOracle {
    pub fn new(inner: Box<dyn SmoothFunction>) -> Self {
        Self {
            inner,
            value_calls: AtomicU64::new(0),
            partial_gradient_calls: AtomicU64::new(0),
        }
    }

    pub fn value(&self, x: &BlockVector) -> f64 {
        self.value_calls.fetch_add(1, Ordering::Relaxed);
        self.inner.value(x)
    }

    /// Function value for diagnostics; leaves the counters alone.
    pub fn value_uncounted(&self, x: &BlockVector) -> f64 {
        self.inner.value(x)
    }

    pub fn partial_gradient(&self, x: &BlockVector, block: usize) -> Vec<f64> {
        self.partial_gradient_calls.fetch_add(1, Ordering::Relaxed);
        self.inner.partial_gradient(x, block)
    }

    /// Counts as one partial-gradient call per block.
    pub fn full_gradient(&self, x: &BlockVector) -> BlockVector {
        let n = x.partition().num_blocks() as u64;
        self.partial_gradient_calls.fetch_add(n, Ordering::Relaxed);
        self.inner.full_gradient(x)
    }

    pub fn value_calls(&self) -> u64 {
        self.value_calls.load(Ordering::Relaxed)
    }

    pub fn partial_gradient_calls(&self) -> u64 {
        self.partial_gradient_calls.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.value_calls.store(0, Ordering::Relaxed);
        self.partial_gradient_calls.store(0, Ordering::Relaxed);
    }
}

/// Exact answer of a linearized block subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedSolution {
    pub y: Vec<f64>,
    /// `<g, y> + h(y)`.
    pub objective: f64,
}

/// One factor `X_i` of the feasible set together with its convex term `h_i`.
///
/// Implementations must solve `min <g, y> + h(y)` over `X_i` exactly.
pub trait BlockTerm: Send + Sync {
    fn dim(&self) -> usize;

    /// `h(y)`; may be `+inf` outside `dom h`.
    fn h_value(&self, _y: &[f64]) -> f64 {
        0.0
    }

    /// `false` when `h` is identically zero, which lets line searches skip it.
    fn has_nonsmooth_term(&self) -> bool {
        false
    }

    fn solve_linearized(&self, g: &[f64]) -> Result<LinearizedSolution>;

    /// Euclidean diameter of `X_i`.
    fn diameter(&self) -> f64;

    fn contains(&self, y: &[f64], tol: f64) -> bool;
}

/// Solution `y_i(x)` of one block subproblem with its gap `phi_i(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockProposal {
    pub block: usize,
    pub y: Vec<f64>,
    /// `max(phi_raw, 0)`.
    pub phi: f64,
    pub phi_raw: f64,
}

pub struct CompositeProblem {
    partition: Arc<BlockPartition>,
    smooth: CountingOracle,
    terms: Vec<Box<dyn BlockTerm>>,
    lipschitz: Vec<Option<f64>>,
    convex: bool,
}

impl fmt::Debug for CompositeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CompositeProblem")
            .field("partition", &self.partition)
            .field("lipschitz", &self.lipschitz)
            .field("convex", &self.convex)
            .finish_non_exhaustive()
    }
}

impl CompositeProblem {
    pub fn new(
        partition: Arc<BlockPartition>,
        smooth: impl SmoothFunction + 'static,
        terms: Vec<Box<dyn BlockTerm>>,
    ) -> Result<Self> {
        if terms.len() != partition.num_blocks() {
            return Err(Error::DimensionMismatch(format!(
                "{} block terms for {} blocks",
                terms.len(),
                partition.num_blocks()
            )));
        }
        for (i, t) in terms.iter().enumerate() {
            if t.dim() != partition.size(i) {
                return Err(Error::DimensionMismatch(format!(
                    "block term {i} has dimension {}, partition says {}",
                    t.dim(),
                    partition.size(i)
                )));
            }
        }
        let n = terms.len();
        Ok(Self {
            partition,
            smooth: CountingOracle::new(Box::new(smooth)),
            terms,
            lipschitz: vec![None; n],
            convex: false,
        })
    }

    /// Attaches partial Lipschitz constants `L_i` of the block gradients.
    pub fn with_lipschitz(mut self, constants: Vec<f64>) -> Result<Self> {
        if constants.len() != self.num_blocks() {
            return Err(Error::DimensionMismatch(format!(
                "{} Lipschitz constants for {} blocks",
                constants.len(),
                self.num_blocks()
            )));
        }
        if constants.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::InvalidParameter(
                "Lipschitz constants must be finite and >= 0".into(),
            ));
        }
        self.lipschitz = constants.into_iter().map(Some).collect();
        Ok(self)
    }

    /// Declares `f` convex, which enables the convex step rule.
    pub fn declare_convex(mut self) -> Self {
        self.convex = true;
        self
    }

    pub fn partition(&self) -> &Arc<BlockPartition> {
        &self.partition
    }

    pub fn num_blocks(&self) -> usize {
        self.partition.num_blocks()
    }

    pub fn term(&self, block: usize) -> &dyn BlockTerm {
        self.terms[block].as_ref()
    }

    pub fn oracle(&self) -> &CountingOracle {
        &self.smooth
    }

    pub fn lipschitz(&self, block: usize) -> Option<f64> {
        self.lipschitz[block]
    }

    pub fn is_convex(&self) -> bool {
        self.convex
    }

    pub fn reset_counters(&self) {
        self.smooth.reset();
    }

    pub fn value_calls(&self) -> u64 {
        self.smooth.value_calls()
    }

    pub fn partial_gradient_calls(&self) -> u64 {
        self.smooth.partial_gradient_calls()
    }

    pub fn vector(&self, data: Vec<f64>) -> Result<BlockVector> {
        BlockVector::new(self.partition.clone(), data)
    }

    pub fn check_block(&self, x: &BlockVector, block: usize) -> Result<()> {
        if self.terms[block].contains(x.block(block), FEASIBILITY_TOL) {
            Ok(())
        } else {
            Err(Error::InfeasibleInput { block })
        }
    }

    pub fn check_feasible(&self, x: &BlockVector) -> Result<()> {
        if x.len() != self.partition.total() {
            return Err(Error::DimensionMismatch(format!(
                "point has length {}, problem has {}",
                x.len(),
                self.partition.total()
            )));
        }
        (0..self.num_blocks()).try_for_each(|i| self.check_block(x, i))
    }

    /// Solves the linearized subproblem of `block` at `x` and returns its gap.
    /// Costs exactly one partial-gradient call.
    pub fn block_proposal(&self, x: &BlockVector, block: usize) -> Result<BlockProposal> {
        self.check_block(x, block)?;
        let g = self.smooth.partial_gradient(x, block);
        self.proposal_from_gradient(x, block, &g)
    }

    /// Same as [`block_proposal`](Self::block_proposal) for a gradient the
    /// caller already holds; no oracle call.
    pub fn proposal_from_gradient(&self, x: &BlockVector, block: usize, g: &[f64]) -> Result<BlockProposal> {
        let term = self.terms[block].as_ref();
        let sol = term.solve_linearized(g)?;
        let xi = x.block(block);
        let lin: f64 = g.iter().zip(xi.iter().zip(&sol.y)).map(|(g, (a, b))| g * (a - b)).sum();
        let phi_raw = if term.has_nonsmooth_term() {
            lin + term.h_value(xi) - term.h_value(&sol.y)
        } else {
            lin
        };
        if !phi_raw.is_finite() || phi_raw < PHI_FAILURE_THRESHOLD {
            return Err(Error::SubsolverFailure { block, phi_raw });
        }
        Ok(BlockProposal {
            block,
            y: sol.y,
            phi: phi_raw.max(0.0),
            phi_raw,
        })
    }

    /// Proposals for every block, in block order. Costs `n` partial-gradient calls.
    pub fn proposals(&self, x: &BlockVector) -> Result<Vec<BlockProposal>> {
        (0..self.num_blocks()).map(|i| self.block_proposal(x, i)).collect()
    }

    /// `phi(x) = sum_i phi_i(x)`.
    pub fn total_gap(&self, x: &BlockVector) -> Result<f64> {
        Ok(self.proposals(x)?.iter().map(|p| p.phi).sum())
    }

    pub fn h_value(&self, x: &BlockVector) -> f64 {
        self.terms
            .iter()
            .enumerate()
            .filter(|(_, t)| t.has_nonsmooth_term())
            .map(|(i, t)| t.h_value(x.block(i)))
            .sum()
    }

    /// `mu(x) = f(x) + sum_i h_i(x_i)`; one value call.
    pub fn mu_value(&self, x: &BlockVector) -> Result<f64> {
        self.check_feasible(x)?;
        Ok(self.smooth.value(x) + self.h_value(x))
    }

    /// `mu(x)` without touching the counters or checking feasibility.
    pub fn mu_uncounted(&self, x: &BlockVector) -> f64 {
        self.smooth.value_uncounted(x) + self.h_value(x)
    }
}

/// Returns `x` with block `block` moved to `x_i + step (y_i - x_i)`.
pub fn apply_block_step(x: &BlockVector, block: usize, y: &[f64], step: f64) -> Result<BlockVector> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::StepOutOfRange(step));
    }
    if y.len() != x.partition().size(block) {
        return Err(Error::DimensionMismatch(format!(
            "target of block {block} has length {}, expected {}",
            y.len(),
            x.partition().size(block)
        )));
    }
    let mut out = x.clone();
    let xi = out.block_mut(block);
    if step == 1.0 {
        xi.copy_from_slice(y);
    } else {
        for (a, b) in xi.iter_mut().zip(y) {
            *a += step * (b - *a);
        }
    }
    Ok(out)
}
