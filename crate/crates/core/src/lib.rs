//! Adaptive partial linearization for composite problems
//! `min f(x) + sum_i h_i(x_i)` over Cartesian products of convex sets.
//!
//! * [`blockcore`]: partitions, block vectors, the problem model and gap function.
//! * [`subsolvers`]: exact block oracles for simplices, boxes and elastic-demand sets.
//! * [`solver`]: the adaptive method with three step rules, and the classic
//!   conditional-gradient baseline.
//! * [`applications`]: benchmark quadratics, SVM duals, network equilibrium and
//!   penalty decomposition.
//! * [`report`]: CSV formats shared by the command-line tools.

pub mod applications;
pub mod blockcore;
pub mod error;
pub mod report;
pub mod solver;
pub mod subsolvers;

pub use blockcore::{
    apply_block_step, BlockPartition, BlockProposal, BlockTerm, BlockVector, CompositeProblem, CountingOracle,
    LinearizedSolution, SmoothFunction,
};
pub use error::{Error, Result};
pub use solver::{
    armijo_search, basic_cycle, convex_rule_search, lipschitz_step, solve_adaptive, solve_classic_cg, BlockSelection,
    IterationRecord, RunTrace, SolverConfig, StepsizeRule, Termination,
};
