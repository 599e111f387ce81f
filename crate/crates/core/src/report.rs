//! Fixed-format CSV output for run traces and benchmark tables.
//!
//! Reals are written with 17 significant digits so a file reproduces the
//! binary values exactly.

use std::fmt::Write;

use crate::solver::RunTrace;

pub const TRACE_HEADER: &str = "stage,iter,block,phi_s,lambda,m,mu,value_calls,pg_calls";
pub const BENCH_HEADER: &str = "method,N,n,it,cl,final_gap,mu_final,wall_ms";

/// Formats a real with 17 significant digits.
pub fn real(v: f64) -> String {
    format!("{v:.16e}")
}

/// One row per iteration record; full-vector steps leave `block` empty.
pub fn trace_csv(trace: &RunTrace) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in &trace.records {
        let block = r.block.map(|b| b.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.stage,
            r.iteration,
            block,
            real(r.phi),
            real(r.step),
            r.exponent,
            real(r.mu),
            r.value_calls,
            r.partial_gradient_calls
        )
        .unwrap();
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub method: String,
    pub dimension: usize,
    pub blocks: usize,
    pub iterations: usize,
    pub partial_gradient_calls: u64,
    pub final_gap: f64,
    pub mu_final: f64,
    pub wall_ms: f64,
}

impl BenchRow {
    pub fn from_trace(method: &str, dimension: usize, blocks: usize, trace: &RunTrace, wall_ms: f64) -> Self {
        Self {
            method: method.to_string(),
            dimension,
            blocks,
            iterations: trace.iterations,
            partial_gradient_calls: trace.partial_gradient_calls,
            final_gap: trace.final_gap,
            mu_final: trace.mu_final,
            wall_ms,
        }
    }
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(BENCH_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.method,
            r.dimension,
            r.blocks,
            r.iterations,
            r.partial_gradient_calls,
            real(r.final_gap),
            real(r.mu_final),
            real(r.wall_ms)
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 123456.789] {
            assert_eq!(real(v).parse::<f64>().unwrap(), v);
        }
    }
}
