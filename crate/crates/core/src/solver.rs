//! The adaptive partial linearization method and the classic
//! conditional-gradient baseline.
//!
//! The adaptive method runs stages `l = 1, 2, ...` with tolerances
//! `delta_l = nu^l delta_0`. Inside a stage the basic cycle repeatedly picks a
//! block whose gap is at least `delta_l`, moves that block alone towards its
//! linearized minimizer and accepts the step by one of three rules. A stage
//! ends once a scan over all blocks at the current point finds every gap
//! below `delta_l`; the run ends when the summed gap drops to `epsilon`.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::blockcore::{apply_block_step, dot, BlockProposal, BlockVector, CompositeProblem};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepsizeRule {
    /// Backtracking on `mu`.
    Armijo,
    /// Backtracking on the block directional derivative; needs convex `f`.
    Convex,
    /// Closed-form step from the partial Lipschitz constant.
    Lipschitz,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockSelection {
    /// Scan cyclically after the last selected block, take the first eligible one.
    CyclicFirst,
    /// Evaluate every block and take the largest gap.
    GreedyMax,
    /// Scan in a freshly shuffled order each time.
    Random { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub beta: f64,
    pub theta: f64,
    /// Base tolerance; `None` picks half the largest block gap at the start point.
    pub delta0: Option<f64>,
    pub nu: f64,
    /// Target for the total gap.
    pub epsilon: f64,
    pub max_stages: usize,
    pub max_iterations: usize,
    pub max_armijo_exponent: u32,
    pub stepsize_rule: StepsizeRule,
    pub selection: BlockSelection,
    /// Never let a stage tolerance fall below `epsilon / n`; once a stage runs at
    /// that level its exit already certifies the target gap.
    pub floor_at_target: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            beta: 0.3,
            theta: 0.5,
            delta0: None,
            nu: 0.5,
            epsilon: 0.1,
            max_stages: 200,
            max_iterations: 100_000,
            max_armijo_exponent: 60,
            stepsize_rule: StepsizeRule::Armijo,
            selection: BlockSelection::CyclicFirst,
            floor_at_target: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, problem: &CompositeProblem) -> Result<()> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !open_unit(self.beta) {
            return Err(Error::InvalidParameter(format!(
                "beta = {} must lie in (0, 1)",
                self.beta
            )));
        }
        if !open_unit(self.theta) {
            return Err(Error::InvalidParameter(format!(
                "theta = {} must lie in (0, 1)",
                self.theta
            )));
        }
        if !open_unit(self.nu) {
            return Err(Error::InvalidParameter(format!("nu = {} must lie in (0, 1)", self.nu)));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "epsilon = {} must be positive",
                self.epsilon
            )));
        }
        if let Some(d) = self.delta0 {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::InvalidParameter(format!("delta0 = {d} must be positive")));
            }
        }
        match self.stepsize_rule {
            StepsizeRule::Convex if !problem.is_convex() => return Err(Error::NotDeclaredConvex),
            StepsizeRule::Lipschitz => {
                if let Some(i) = (0..problem.num_blocks()).find(|&i| problem.lipschitz(i).is_none()) {
                    return Err(Error::MissingLipschitz(i));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub stage: usize,
    pub iteration: usize,
    /// Selected block; `None` for full-vector steps of the baseline.
    pub block: Option<usize>,
    pub phi: f64,
    pub step: f64,
    pub exponent: u32,
    /// `mu` at the new point.
    pub mu: f64,
    pub value_calls: u64,
    pub partial_gradient_calls: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    IterationBudget,
    StageBudget,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::IterationBudget => "iteration_budget",
            Termination::StageBudget => "stage_budget",
        }
    }
}

#[derive(Clone)]
pub struct RunTrace {
    pub records: Vec<IterationRecord>,
    /// Iterations taken in each stage.
    pub stage_iterations: Vec<usize>,
    pub stage_tolerances: Vec<f64>,
    /// Total gap at each stage exit point.
    pub stage_gaps: Vec<f64>,
    pub delta0: f64,
    pub initial_gap: f64,
    pub point: BlockVector,
    pub final_gap: f64,
    pub mu_final: f64,
    /// Iterations performed; a converged run counts its final stopping test
    /// as one iteration, so this is one more than the number of steps.
    pub iterations: usize,
    pub termination: Termination,
    pub value_calls: u64,
    pub partial_gradient_calls: u64,
}

impl fmt::Debug for RunTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RunTrace")
            .field("termination", &self.termination)
            .field("iterations", &self.iterations)
            .field("stages", &self.stages())
            .field("final_gap", &self.final_gap)
            .field("mu_final", &self.mu_final)
            .field("value_calls", &self.value_calls)
            .field("partial_gradient_calls", &self.partial_gradient_calls)
            .finish_non_exhaustive()
    }
}

impl RunTrace {
    pub fn stages(&self) -> usize {
        self.stage_iterations.len()
    }

    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

#[derive(Debug, Clone)]
pub struct LineSearchResult {
    pub step: f64,
    pub exponent: u32,
    pub point: BlockVector,
    /// `mu` at the accepted point when the rule evaluated it.
    pub mu: Option<f64>,
}

/// Smallest `m` with `mu(x + theta^m d) <= mu(x) - beta theta^m phi_s(x)`.
pub fn armijo_search(
    problem: &CompositeProblem,
    x: &BlockVector,
    mu_x: f64,
    proposal: &BlockProposal,
    beta: f64,
    theta: f64,
    max_exponent: u32,
) -> Result<LineSearchResult> {
    let mut step = 1.0;
    for m in 0..=max_exponent {
        let trial = apply_block_step(x, proposal.block, &proposal.y, step)?;
        let mu = problem.mu_value(&trial)?;
        if mu <= mu_x - beta * step * proposal.phi {
            return Ok(LineSearchResult {
                step,
                exponent: m,
                point: trial,
                mu: Some(mu),
            });
        }
        step *= theta;
    }
    Err(Error::StepsizeUnderflow {
        block: Some(proposal.block),
        max_exponent,
    })
}

/// Smallest `m` with
/// `<g_s(x + theta^m d), d_s> + theta^-m (h_s(x_s + theta^m d_s) - h_s(x_s)) <= -beta phi_s(x)`.
///
/// Each probe costs one partial gradient of the selected block and no
/// function value.
pub fn convex_rule_search(
    problem: &CompositeProblem,
    x: &BlockVector,
    proposal: &BlockProposal,
    beta: f64,
    theta: f64,
    max_exponent: u32,
) -> Result<LineSearchResult> {
    if !problem.is_convex() {
        return Err(Error::NotDeclaredConvex);
    }
    let s = proposal.block;
    let term = problem.term(s);
    let xs = x.block(s);
    let d: Vec<f64> = proposal.y.iter().zip(xs).map(|(y, x)| y - x).collect();
    let h_x = if term.has_nonsmooth_term() {
        term.h_value(xs)
    } else {
        0.0
    };
    let mut step = 1.0;
    for m in 0..=max_exponent {
        let trial = apply_block_step(x, s, &proposal.y, step)?;
        let g = problem.oracle().partial_gradient(&trial, s);
        let mut lhs = dot(&g, &d);
        if term.has_nonsmooth_term() {
            lhs += (term.h_value(trial.block(s)) - h_x) / step;
        }
        if lhs <= -beta * proposal.phi {
            return Ok(LineSearchResult {
                step,
                exponent: m,
                point: trial,
                mu: None,
            });
        }
        step *= theta;
    }
    Err(Error::StepsizeUnderflow {
        block: Some(s),
        max_exponent,
    })
}

/// `min(1, 2 (1 - beta) phi / (|d|^2 L))`.
pub fn lipschitz_step(phi: f64, d_norm: f64, lipschitz: f64, beta: f64) -> f64 {
    let denom = d_norm * d_norm * lipschitz;
    if denom <= 0.0 {
        return 1.0;
    }
    (2.0 * (1.0 - beta) * phi / denom).min(1.0)
}

enum CycleEnd {
    /// Every block gap at the current point is below the tolerance.
    Stationary {
        gap: f64,
    },
    Budget,
}

struct Runner<'a> {
    problem: &'a CompositeProblem,
    config: &'a SolverConfig,
    x: BlockVector,
    mu: f64,
    /// Proposals evaluated at the current point.
    fresh: Vec<Option<BlockProposal>>,
    cursor: usize,
    rng: Option<ChaCha8Rng>,
    iterations: usize,
    records: Vec<IterationRecord>,
    stage_iterations: Vec<usize>,
    stage_tolerances: Vec<f64>,
    stage_gaps: Vec<f64>,
}

impl<'a> Runner<'a> {
    fn new(problem: &'a CompositeProblem, config: &'a SolverConfig, x0: BlockVector) -> Result<Self> {
        config.validate(problem)?;
        problem.check_feasible(&x0)?;
        problem.reset_counters();
        let mu = match config.stepsize_rule {
            StepsizeRule::Armijo => problem.mu_value(&x0)?,
            _ => problem.mu_uncounted(&x0),
        };
        let rng = match config.selection {
            BlockSelection::Random { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
            _ => None,
        };
        Ok(Self {
            problem,
            config,
            x: x0,
            mu,
            fresh: vec![None; problem.num_blocks()],
            cursor: 0,
            rng,
            iterations: 0,
            records: Vec::new(),
            stage_iterations: Vec::new(),
            stage_tolerances: Vec::new(),
            stage_gaps: Vec::new(),
        })
    }

    fn proposal(&mut self, block: usize) -> Result<&BlockProposal> {
        if self.fresh[block].is_none() {
            self.fresh[block] = Some(self.problem.block_proposal(&self.x, block)?);
        }
        Ok(self.fresh[block].as_ref().unwrap())
    }

    fn scan_all(&mut self) -> Result<f64> {
        let mut gap = 0.0;
        for i in 0..self.problem.num_blocks() {
            gap += self.proposal(i)?.phi;
        }
        Ok(gap)
    }

    fn cached_gap(&self) -> f64 {
        self.fresh.iter().map(|p| p.as_ref().map_or(0.0, |p| p.phi)).sum()
    }

    /// Step 1 of the basic cycle: a block with `phi_s >= delta`, if any.
    fn select(&mut self, delta: f64) -> Result<Option<BlockProposal>> {
        let n = self.problem.num_blocks();
        let order: Vec<usize> = match self.config.selection {
            BlockSelection::CyclicFirst => (0..n).map(|k| (self.cursor + k) % n).collect(),
            BlockSelection::GreedyMax => {
                let mut best: Option<(usize, f64)> = None;
                for i in 0..n {
                    let phi = self.proposal(i)?.phi;
                    if best.is_none_or(|(_, b)| phi > b) {
                        best = Some((i, phi));
                    }
                }
                let (i, phi) = best.unwrap();
                return Ok((phi >= delta).then(|| self.fresh[i].clone().unwrap()));
            }
            BlockSelection::Random { .. } => {
                let mut order: Vec<usize> = (0..n).collect();
                order.shuffle(self.rng.as_mut().unwrap());
                order
            }
        };
        for i in order {
            if self.proposal(i)?.phi >= delta {
                self.cursor = (i + 1) % n;
                return Ok(self.fresh[i].clone());
            }
        }
        Ok(None)
    }

    fn step(&mut self, proposal: &BlockProposal, stage: usize) -> Result<()> {
        let cfg = self.config;
        let pb = self.problem;
        let ls = match cfg.stepsize_rule {
            StepsizeRule::Armijo => armijo_search(
                pb,
                &self.x,
                self.mu,
                proposal,
                cfg.beta,
                cfg.theta,
                cfg.max_armijo_exponent,
            )?,
            StepsizeRule::Convex => {
                convex_rule_search(pb, &self.x, proposal, cfg.beta, cfg.theta, cfg.max_armijo_exponent)?
            }
            StepsizeRule::Lipschitz => {
                let s = proposal.block;
                let d_norm = proposal
                    .y
                    .iter()
                    .zip(self.x.block(s))
                    .map(|(y, x)| (y - x).powi(2))
                    .sum::<f64>()
                    .sqrt();
                let lipschitz = pb.lipschitz(s).ok_or(Error::MissingLipschitz(s))?;
                let step = lipschitz_step(proposal.phi, d_norm, lipschitz, cfg.beta);
                LineSearchResult {
                    step,
                    exponent: 0,
                    point: apply_block_step(&self.x, s, &proposal.y, step)?,
                    mu: None,
                }
            }
        };
        self.x = ls.point;
        self.mu = ls.mu.unwrap_or_else(|| pb.mu_uncounted(&self.x));
        self.fresh.iter_mut().for_each(|p| *p = None);
        self.records.push(IterationRecord {
            stage,
            iteration: self.iterations,
            block: Some(proposal.block),
            phi: proposal.phi,
            step: ls.step,
            exponent: ls.exponent,
            mu: self.mu,
            value_calls: pb.value_calls(),
            partial_gradient_calls: pb.partial_gradient_calls(),
        });
        self.iterations += 1;
        Ok(())
    }

    fn cycle(&mut self, delta: f64, stage: usize) -> Result<CycleEnd> {
        let start = self.iterations;
        self.stage_tolerances.push(delta);
        let end = loop {
            match self.select(delta)? {
                None => {
                    // the scan that found no eligible block covered every block at self.x
                    break CycleEnd::Stationary { gap: self.scan_all()? };
                }
                Some(p) => {
                    if self.iterations >= self.config.max_iterations {
                        break CycleEnd::Budget;
                    }
                    self.step(&p, stage)?;
                }
            }
        };
        self.stage_iterations.push(self.iterations - start);
        if let CycleEnd::Stationary { gap } = end {
            self.stage_gaps.push(gap);
        }
        Ok(end)
    }

    fn finish(self, termination: Termination, final_gap: f64, delta0: f64, initial_gap: f64) -> RunTrace {
        RunTrace {
            records: self.records,
            stage_iterations: self.stage_iterations,
            stage_tolerances: self.stage_tolerances,
            stage_gaps: self.stage_gaps,
            delta0,
            initial_gap,
            point: self.x,
            final_gap,
            mu_final: self.mu,
            iterations: self.iterations,
            termination,
            value_calls: self.problem.value_calls(),
            partial_gradient_calls: self.problem.partial_gradient_calls(),
        }
    }
}

/// One basic cycle at tolerance `delta` starting from `x0`.
///
/// On success every block gap at the returned point is below `delta`.
pub fn basic_cycle(
    problem: &CompositeProblem,
    x0: &BlockVector,
    delta: f64,
    config: &SolverConfig,
) -> Result<(BlockVector, Vec<IterationRecord>)> {
    if delta.is_nan() || delta <= 0.0 {
        return Err(Error::InvalidParameter(format!("delta = {delta} must be positive")));
    }
    let mut runner = Runner::new(problem, config, x0.clone())?;
    match runner.cycle(delta, 1)? {
        CycleEnd::Stationary { .. } => Ok((runner.x, runner.records)),
        CycleEnd::Budget => {
            let gap = runner.scan_all()?;
            Err(Error::IterationBudgetExceeded(Box::new(runner.finish(
                Termination::IterationBudget,
                gap,
                delta,
                f64::NAN,
            ))))
        }
    }
}

/// The adaptive method: basic cycles under a geometrically shrinking tolerance.
pub fn solve_adaptive(problem: &CompositeProblem, z0: &BlockVector, config: &SolverConfig) -> Result<RunTrace> {
    let mut runner = Runner::new(problem, config, z0.clone())?;
    let n = problem.num_blocks();
    let initial_gap = runner.scan_all()?;
    let max_phi = runner.fresh.iter().flatten().map(|p| p.phi).fold(0.0, f64::max);
    let delta0 = match config.delta0 {
        Some(d) => d,
        None if max_phi > 0.0 => 0.5 * max_phi,
        None => config.epsilon,
    };
    if initial_gap <= config.epsilon {
        runner.stage_tolerances.push(delta0 * config.nu);
        runner.stage_iterations.push(0);
        runner.stage_gaps.push(initial_gap);
        runner.iterations = 1;
        return Ok(runner.finish(Termination::Converged, initial_gap, delta0, initial_gap));
    }
    let floor = config.epsilon / n as f64;
    let mut delta = delta0;
    for stage in 1..=config.max_stages {
        delta *= config.nu;
        let tol = if config.floor_at_target {
            delta.max(floor)
        } else {
            delta
        };
        match runner.cycle(tol, stage)? {
            CycleEnd::Stationary { gap } if gap <= config.epsilon => {
                runner.iterations += 1;
                return Ok(runner.finish(Termination::Converged, gap, delta0, initial_gap));
            }
            CycleEnd::Stationary { .. } => {}
            CycleEnd::Budget => {
                let gap = runner.scan_all()?;
                let trace = runner.finish(Termination::IterationBudget, gap, delta0, initial_gap);
                return Err(Error::IterationBudgetExceeded(Box::new(trace)));
            }
        }
    }
    let gap = runner.cached_gap();
    let trace = runner.finish(Termination::StageBudget, gap, delta0, initial_gap);
    Err(Error::StageBudgetExceeded(Box::new(trace)))
}

/// Classic conditional gradient: every iteration linearizes all blocks and
/// moves the whole vector, with the Armijo rule on the total gap.
///
/// Every iteration costs exactly `n` partial gradients.
pub fn solve_classic_cg(problem: &CompositeProblem, x0: &BlockVector, config: &SolverConfig) -> Result<RunTrace> {
    let mut cfg = config.clone();
    cfg.stepsize_rule = StepsizeRule::Armijo;
    let mut runner = Runner::new(problem, &cfg, x0.clone())?;
    let mut initial_gap = f64::NAN;
    loop {
        let proposals = problem.proposals(&runner.x)?;
        let gap: f64 = proposals.iter().map(|p| p.phi).sum();
        runner.iterations += 1;
        if initial_gap.is_nan() {
            initial_gap = gap;
        }
        if gap <= cfg.epsilon || runner.iterations >= cfg.max_iterations {
            let termination = if gap <= cfg.epsilon {
                Termination::Converged
            } else {
                Termination::IterationBudget
            };
            runner.stage_iterations.push(runner.iterations);
            runner.stage_tolerances.push(cfg.epsilon);
            runner.stage_gaps.push(gap);
            let trace = runner.finish(termination, gap, f64::NAN, initial_gap);
            return match termination {
                Termination::Converged => Ok(trace),
                _ => Err(Error::IterationBudgetExceeded(Box::new(trace))),
            };
        }
        let mut step = 1.0;
        let mut accepted = None;
        for m in 0..=cfg.max_armijo_exponent {
            let mut trial = runner.x.clone();
            for p in &proposals {
                let xi = trial.block_mut(p.block);
                for (a, b) in xi.iter_mut().zip(&p.y) {
                    *a += step * (b - *a);
                }
            }
            let mu = problem.mu_value(&trial)?;
            if mu <= runner.mu - cfg.beta * step * gap {
                accepted = Some((trial, mu, m));
                break;
            }
            step *= cfg.theta;
        }
        let (point, mu, exponent) = accepted.ok_or(Error::StepsizeUnderflow {
            block: None,
            max_exponent: cfg.max_armijo_exponent,
        })?;
        runner.x = point;
        runner.mu = mu;
        runner.records.push(IterationRecord {
            stage: 1,
            iteration: runner.iterations - 1,
            block: None,
            phi: gap,
            step,
            exponent,
            mu,
            value_calls: problem.value_calls(),
            partial_gradient_calls: problem.partial_gradient_calls(),
        });
    }
}
