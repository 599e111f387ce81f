use thiserror::Error;

use crate::solver::RunTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("block {block}: point is outside the feasible set")]
    InfeasibleInput { block: usize },

    #[error("block {block}: subsolver could not certify optimality (phi = {phi_raw:e})")]
    SubsolverFailure { block: usize, phi_raw: f64 },

    #[error("step length {0} is outside (0, 1]")]
    StepOutOfRange(f64),

    #[error("line search exceeded {max_exponent} backtracking steps on block {block:?}")]
    StepsizeUnderflow { block: Option<usize>, max_exponent: u32 },

    #[error("the convex step rule needs a problem declared convex")]
    NotDeclaredConvex,

    #[error("the lipschitz step rule needs a partial Lipschitz constant on block {0}")]
    MissingLipschitz(usize),

    #[error("iteration budget exhausted (gap {:e})", .0.final_gap)]
    IterationBudgetExceeded(Box<RunTrace>),

    #[error("stage budget exhausted (gap {:e})", .0.final_gap)]
    StageBudgetExceeded(Box<RunTrace>),

    #[error("inverse demand is not strictly decreasing on [0, cap]")]
    NonMonotoneDemand,

    #[error("origin/destination pair {0} has no connecting path")]
    DisconnectedPair(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    /// The partial run attached to a budget exit, if any.
    pub fn trace(&self) -> Option<&RunTrace> {
        match self {
            Error::IterationBudgetExceeded(t) | Error::StageBudgetExceeded(t) => Some(t),
            _ => None,
        }
    }

    pub fn into_trace(self) -> std::result::Result<RunTrace, Error> {
        match self {
            Error::IterationBudgetExceeded(t) | Error::StageBudgetExceeded(t) => Ok(*t),
            other => Err(other),
        }
    }

    pub fn is_budget(&self) -> bool {
        self.trace().is_some()
    }
}
