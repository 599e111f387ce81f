//! Problem generators built on the composite model.

pub mod benchmark;
pub mod network;
pub mod penalty;
pub mod svm;

pub use benchmark::{benchmark_start, build_benchmark, BenchmarkObjective, BenchmarkSpec};
pub use network::{build_network_problem, shortest_path_costs, NetworkModel, NetworkSpec};
pub use penalty::{build_penalty_problem, penalty_continuation, PenaltySpec};
pub use svm::{build_svm_dual, parse_svm_csv, SvmDualSpec, SvmObject, SvmRecovery};
