//! Command-line front end for the partlin solvers.

pub mod commands;
pub mod manifest;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{cmd_bench, cmd_netassign, cmd_solve, cmd_svm, exit_code, run_method, Outcome};
pub use manifest::{Command, Method, RunArgs, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "partlin", version, about = "Adaptive partial linearization solvers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Compare CGM and ACGM on a benchmark problem and write bench.csv.
    Bench {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Solve a benchmark problem and write trace.csv and solution.json.
    Solve {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum)]
        method: Option<Method>,
    },
    /// Compute an elastic-demand network equilibrium.
    Netassign {
        /// Network description file.
        network: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Train a classifier of point-set objects through its dual.
    Svm {
        /// CSV with rows object_id,label,feat1,...,featm.
        data: PathBuf,
        /// Penalty C on the dual variables of each object.
        #[arg(long = "C")]
        penalty: Option<f64>,
        #[command(flatten)]
        run: RunArgs,
    },
}

impl Sub {
    pub fn manifest(&self) -> anyhow::Result<RunManifest> {
        Ok(match self {
            Sub::Bench { run } => run.resolve(Command::Bench)?,
            Sub::Solve { run, method } => {
                let mut m = run.resolve(Command::Solve)?;
                if let Some(method) = method {
                    m.method = *method;
                }
                m
            }
            Sub::Netassign { network, run } => RunManifest {
                input: Some(network.clone()),
                ..run.resolve(Command::Netassign)?
            },
            Sub::Svm { data, penalty, run } => {
                let mut m = RunManifest {
                    input: Some(data.clone()),
                    ..run.resolve(Command::Svm)?
                };
                if let Some(c) = penalty {
                    m.penalty = *c;
                }
                m
            }
        })
    }
}

/// Dispatches on the manifest's command.
pub fn execute(manifest: &RunManifest) -> anyhow::Result<Outcome> {
    match manifest.command {
        Command::Bench => cmd_bench(manifest),
        Command::Solve => cmd_solve(manifest),
        Command::Netassign => cmd_netassign(manifest),
        Command::Svm => cmd_svm(manifest),
    }
}

/// Parses, runs and maps the result to a process exit code.
pub fn run(cli: &Cli) -> u8 {
    let result = cli.command.manifest().and_then(|m| execute(&m));
    if let Err(e) = &result {
        eprintln!("error: {e:#}");
    }
    exit_code(&result)
}
