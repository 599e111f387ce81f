use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use partlin_core::applications::{
    benchmark_start, build_benchmark, build_network_problem, build_svm_dual, parse_svm_csv, NetworkSpec, SvmDualSpec,
};
use partlin_core::report::{self, real, BenchRow};
use partlin_core::{solve_adaptive, solve_classic_cg, BlockVector, CompositeProblem, Error, RunTrace, SolverConfig};
use serde::Serialize;

use crate::manifest::{Method, RunManifest};

/// How a command finished when it produced results.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Converged,
    Budget,
}

impl Outcome {
    fn of(trace: &RunTrace) -> Self {
        if trace.converged() {
            Outcome::Converged
        } else {
            Outcome::Budget
        }
    }

    fn worst(self, other: Self) -> Self {
        if self == Outcome::Budget || other == Outcome::Budget {
            Outcome::Budget
        } else {
            Outcome::Converged
        }
    }
}

/// 0 converged, 1 input error, 2 budget exit, 3 oracle inconsistency.
pub fn exit_code(result: &anyhow::Result<Outcome>) -> u8 {
    match result {
        Ok(Outcome::Converged) => 0,
        Ok(Outcome::Budget) => 2,
        Err(e) => match e.chain().find_map(|c| c.downcast_ref::<Error>()) {
            Some(Error::StepsizeUnderflow { .. } | Error::SubsolverFailure { .. }) => 3,
            _ => 1,
        },
    }
}

/// Runs one method; budget exits return their partial trace.
pub fn run_method(
    problem: &CompositeProblem,
    x0: &BlockVector,
    config: &SolverConfig,
    method: Method,
) -> Result<RunTrace, Error> {
    let result = match method {
        Method::Acgm => solve_adaptive(problem, x0, config),
        Method::Cgm => solve_classic_cg(problem, x0, config),
    };
    result.or_else(Error::into_trace)
}

fn write(dir: &Path, name: &str, contents: &str) -> anyhow::Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn prepare_out(manifest: &RunManifest) -> anyhow::Result<&Path> {
    fs::create_dir_all(&manifest.out).with_context(|| format!("creating {}", manifest.out.display()))?;
    write(&manifest.out, "manifest.json", &manifest.to_json())?;
    Ok(&manifest.out)
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes")
}

pub fn cmd_bench(manifest: &RunManifest) -> anyhow::Result<Outcome> {
    let spec = manifest.benchmark_spec()?;
    let config = manifest.solver_config();
    let timed = |method: Method| -> Result<(RunTrace, f64), Error> {
        let problem = build_benchmark(&spec)?;
        let x0 = benchmark_start(&problem);
        let start = Instant::now();
        let trace = run_method(&problem, &x0, &config, method)?;
        Ok((trace, start.elapsed().as_secs_f64() * 1e3))
    };
    let (cgm, acgm) = std::thread::scope(|s| {
        let cgm = s.spawn(|| timed(Method::Cgm));
        let acgm = s.spawn(|| timed(Method::Acgm));
        (
            cgm.join().expect("CGM solve panicked"),
            acgm.join().expect("ACGM solve panicked"),
        )
    });
    let (cgm, cgm_ms) = cgm?;
    let (acgm, acgm_ms) = acgm?;
    let rows = [
        BenchRow::from_trace("CGM", spec.dimension, spec.blocks, &cgm, cgm_ms),
        BenchRow::from_trace("ACGM", spec.dimension, spec.blocks, &acgm, acgm_ms),
    ];
    let dir = prepare_out(manifest)?;
    write(dir, "bench.csv", &report::bench_csv(&rows))?;
    for r in &rows {
        println!(
            "{:<5} N={} n={}  it={} cl={} gap={:.4} mu={:.6}",
            r.method, r.dimension, r.blocks, r.iterations, r.partial_gradient_calls, r.final_gap, r.mu_final
        );
    }
    Ok(Outcome::of(&cgm).worst(Outcome::of(&acgm)))
}

#[derive(Debug, Serialize)]
struct Solution<'a> {
    method: Method,
    termination: &'a str,
    iterations: usize,
    stages: usize,
    final_gap: f64,
    initial_gap: f64,
    mu_final: f64,
    value_calls: u64,
    partial_gradient_calls: u64,
    point: &'a [f64],
}

impl<'a> Solution<'a> {
    fn new(method: Method, trace: &'a RunTrace) -> Self {
        Self {
            method,
            termination: trace.termination.as_str(),
            iterations: trace.iterations,
            stages: trace.stages(),
            final_gap: trace.final_gap,
            initial_gap: trace.initial_gap,
            mu_final: trace.mu_final,
            value_calls: trace.value_calls,
            partial_gradient_calls: trace.partial_gradient_calls,
            point: trace.point.as_slice(),
        }
    }
}

pub fn cmd_solve(manifest: &RunManifest) -> anyhow::Result<Outcome> {
    let problem = build_benchmark(&manifest.benchmark_spec()?)?;
    let x0 = benchmark_start(&problem);
    let trace = run_method(&problem, &x0, &manifest.solver_config(), manifest.method)?;
    let dir = prepare_out(manifest)?;
    write(dir, "trace.csv", &report::trace_csv(&trace))?;
    write(dir, "solution.json", &json(&Solution::new(manifest.method, &trace)))?;
    println!(
        "{}: {} after {} iterations, gap {:e}, mu {:.12}",
        match manifest.method {
            Method::Acgm => "ACGM",
            Method::Cgm => "CGM",
        },
        trace.termination.as_str(),
        trace.iterations,
        trace.final_gap,
        trace.mu_final
    );
    Ok(Outcome::of(&trace))
}

#[derive(Debug, Serialize)]
struct NetworkSummary<'a> {
    termination: &'a str,
    iterations: usize,
    final_gap: f64,
    objective: f64,
    max_residual: f64,
}

pub fn cmd_netassign(manifest: &RunManifest) -> anyhow::Result<Outcome> {
    let path = manifest.input()?;
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let spec = NetworkSpec::parse(&text).with_context(|| format!("parsing {}", path.display()))?;
    let model = build_network_problem(&spec)?;
    let trace = run_method(
        &model.problem,
        &model.start_point(),
        &manifest.solver_config(),
        manifest.method,
    )?;
    let report = model.equilibrium_report(&trace.point);

    let mut arcs = String::from("arc,from,to,flow,cost\n");
    for (i, ((a, f), c)) in spec
        .arcs
        .iter()
        .zip(&report.arc_flows)
        .zip(&report.arc_costs)
        .enumerate()
    {
        let (from, to) = (&spec.nodes[a.from], &spec.nodes[a.to]);
        writeln!(arcs, "{i},{from},{to},{},{}", real(*f), real(*c)).unwrap();
    }
    let mut pairs = String::from("pair,origin,destination,demand,lambda,residual\n");
    for (m, (p, r)) in spec.pairs.iter().zip(&report.pairs).enumerate() {
        let (o, d) = (&spec.nodes[p.origin], &spec.nodes[p.destination]);
        writeln!(
            pairs,
            "{m},{o},{d},{},{},{}",
            real(r.demand),
            real(r.lambda),
            real(r.residual)
        )
        .unwrap();
    }
    let dir = prepare_out(manifest)?;
    write(dir, "arcs.csv", &arcs)?;
    write(dir, "pairs.csv", &pairs)?;
    let summary = NetworkSummary {
        termination: trace.termination.as_str(),
        iterations: trace.iterations,
        final_gap: trace.final_gap,
        objective: trace.mu_final,
        max_residual: report.max_residual,
    };
    write(dir, "summary.json", &json(&summary))?;
    println!(
        "{} after {} iterations, gap {:e}, max residual {:e}",
        summary.termination, summary.iterations, summary.final_gap, summary.max_residual
    );
    Ok(Outcome::of(&trace))
}

#[derive(Debug, Serialize)]
struct SvmReport<'a> {
    termination: &'a str,
    iterations: usize,
    final_gap: f64,
    dual_objective: f64,
    w: Vec<f64>,
    slacks: Vec<f64>,
    margins: Vec<f64>,
    alpha: Vec<Vec<f64>>,
}

pub fn cmd_svm(manifest: &RunManifest) -> anyhow::Result<Outcome> {
    let path = manifest.input()?;
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let objects = parse_svm_csv(&text).with_context(|| format!("parsing {}", path.display()))?;
    let spec = SvmDualSpec {
        objects,
        penalty: manifest.penalty,
    };
    let (problem, recovery) = build_svm_dual(&spec)?;
    let x0 = BlockVector::zeros(problem.partition().clone());
    let trace = run_method(&problem, &x0, &manifest.solver_config(), manifest.method)?;
    let w = recovery.recover_w(&trace.point);
    let out = SvmReport {
        termination: trace.termination.as_str(),
        iterations: trace.iterations,
        final_gap: trace.final_gap,
        dual_objective: recovery.dual_objective(&trace.point),
        slacks: recovery.slacks(&w),
        margins: recovery.margins(&w),
        alpha: (0..problem.num_blocks())
            .map(|i| trace.point.block(i).to_vec())
            .collect(),
        w,
    };
    let dir = prepare_out(manifest)?;
    write(dir, "trace.csv", &report::trace_csv(&trace))?;
    write(dir, "svm.json", &json(&out))?;
    println!(
        "{} after {} iterations, dual objective {:.9}, w = {:?}",
        out.termination, out.iterations, out.dual_objective, out.w
    );
    Ok(Outcome::of(&trace))
}
