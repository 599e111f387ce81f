use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use partlin_core::applications::{BenchmarkObjective, BenchmarkSpec};
use partlin_core::{BlockSelection, SolverConfig, StepsizeRule};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Bench,
    Solve,
    Netassign,
    Svm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Adaptive partial linearization.
    Acgm,
    /// Classic conditional gradient.
    Cgm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    F1,
    F1f2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    Armijo,
    Convex,
    Lipschitz,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Select {
    Cyclic,
    Greedy,
    Random,
}

/// A complete run description, stored as a flat JSON object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunManifest {
    pub command: Command,
    pub method: Method,
    #[serde(rename = "N")]
    pub dimension: usize,
    pub n: usize,
    pub objective: Objective,
    /// Network file or SVM csv for the commands that read one.
    pub input: Option<PathBuf>,
    /// SVM penalty `C`.
    pub penalty: f64,
    pub rule: Rule,
    pub beta: f64,
    pub theta: f64,
    pub delta0: Option<f64>,
    pub nu: f64,
    pub eps: f64,
    pub select: Select,
    pub seed: u64,
    pub max_iters: usize,
    pub max_stages: usize,
    /// Largest backtracking exponent tried by the line searches.
    pub max_backtracks: u32,
    pub out: PathBuf,
}

impl Default for RunManifest {
    fn default() -> Self {
        let cfg = SolverConfig::default();
        Self {
            command: Command::Solve,
            method: Method::Acgm,
            dimension: 10,
            n: 5,
            objective: Objective::F1,
            input: None,
            penalty: 1.0,
            rule: Rule::Armijo,
            beta: cfg.beta,
            theta: cfg.theta,
            delta0: cfg.delta0,
            nu: cfg.nu,
            eps: cfg.epsilon,
            select: Select::Cyclic,
            seed: 0,
            max_iters: cfg.max_iterations,
            max_stages: cfg.max_stages,
            max_backtracks: cfg.max_armijo_exponent,
            out: PathBuf::from("out"),
        }
    }
}

impl RunManifest {
    pub fn for_command(command: Command) -> Self {
        let mut m = Self {
            command,
            ..Self::default()
        };
        if command == Command::Netassign {
            m.eps = 1e-6;
            m.max_iters = 5_000_000;
        }
        m
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            beta: self.beta,
            theta: self.theta,
            delta0: self.delta0,
            nu: self.nu,
            epsilon: self.eps,
            max_stages: self.max_stages,
            max_iterations: self.max_iters,
            max_armijo_exponent: self.max_backtracks,
            stepsize_rule: match self.rule {
                Rule::Armijo => StepsizeRule::Armijo,
                Rule::Convex => StepsizeRule::Convex,
                Rule::Lipschitz => StepsizeRule::Lipschitz,
            },
            selection: match self.select {
                Select::Cyclic => BlockSelection::CyclicFirst,
                Select::Greedy => BlockSelection::GreedyMax,
                Select::Random => BlockSelection::Random { seed: self.seed },
            },
            ..SolverConfig::default()
        }
    }

    pub fn benchmark_spec(&self) -> anyhow::Result<BenchmarkSpec> {
        if self.n == 0 || !self.dimension.is_multiple_of(self.n) {
            bail!("N = {} must be a positive multiple of n = {}", self.dimension, self.n);
        }
        let objective = match self.objective {
            Objective::F1 => BenchmarkObjective::F1,
            Objective::F1f2 => BenchmarkObjective::F1PlusF2,
        };
        Ok(BenchmarkSpec::new(self.dimension, self.n, objective))
    }

    pub fn input(&self) -> anyhow::Result<&Path> {
        self.input.as_deref().context("this command needs an input file")
    }
}

/// Flags shared by every subcommand; each one overrides the manifest.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Flat JSON manifest providing defaults for every flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Total dimension of the benchmark problem.
    #[arg(long = "N")]
    pub dimension: Option<usize>,
    /// Number of blocks.
    #[arg(long = "n")]
    pub blocks: Option<usize>,
    #[arg(long, value_enum)]
    pub objective: Option<Objective>,
    #[arg(long, value_enum)]
    pub rule: Option<Rule>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    /// First-stage tolerance; defaults to half the largest initial block gap.
    #[arg(long)]
    pub delta0: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    /// Target accuracy on the total gap.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, value_enum)]
    pub select: Option<Select>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "max-iters")]
    pub max_iters: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    pub fn resolve(&self, command: Command) -> anyhow::Result<RunManifest> {
        let mut m = match &self.config {
            Some(path) => RunManifest::load(path)?,
            None => RunManifest::for_command(command),
        };
        m.command = command;
        macro_rules! overlay {
            ($($flag:ident => $field:ident),* $(,)?) => {
                $(if let Some(v) = self.$flag.clone() { m.$field = v; })*
            };
        }
        overlay!(
            dimension => dimension,
            blocks => n,
            objective => objective,
            rule => rule,
            beta => beta,
            theta => theta,
            nu => nu,
            eps => eps,
            select => select,
            seed => seed,
            max_iters => max_iters,
            out => out,
        );
        if self.delta0.is_some() {
            m.delta0 = self.delta0;
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trips() {
        let m = RunManifest {
            delta0: Some(0.25),
            input: Some("net.txt".into()),
            rule: Rule::Lipschitz,
            select: Select::Random,
            seed: 17,
            ..RunManifest::default()
        };
        let back: RunManifest = serde_json::from_str(&m.to_json()).unwrap();
        assert_eq!(back, m);
        let json: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
        assert!(json
            .as_object()
            .unwrap()
            .values()
            .all(|v| !v.is_object() && !v.is_array()));
        assert_eq!(json["N"], 10);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<RunManifest>(r#"{"N": 10, "blocks": 5}"#).is_err());
        let m: RunManifest = serde_json::from_str(r#"{"N": 20, "n": 4}"#).unwrap();
        assert_eq!((m.dimension, m.n, m.eps), (20, 4, 0.1));
    }

    #[test]
    fn flags_override_manifest() {
        let args = RunArgs {
            blocks: Some(2),
            eps: Some(0.5),
            ..RunArgs::default()
        };
        let m = args.resolve(Command::Bench).unwrap();
        assert_eq!((m.command, m.n, m.eps), (Command::Bench, 2, 0.5));
        assert!(m.benchmark_spec().is_ok());
        let bad = RunManifest { n: 3, ..m };
        assert!(bad.benchmark_spec().is_err());
    }
}
