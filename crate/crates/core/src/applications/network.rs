//! Path-flow network equilibrium with elastic demands.
//!
//! Each O/D pair `m` owns the block `(u_m, v_m)` of path flows and demand.
//! The objective is `sum_a eta_a(f_a) - sum_m sigma_m(v_m)` with
//! `eta_a(f) = int_0^f c_a` and `sigma_m(v) = int_0^v tau_m`; the second sum is
//! the nonsmooth part carried by [`ElasticDemandBlock`]. Arc costs are affine,
//! `c_a(f) = a0 + a1 f`, and path sets are enumerated up front.

use std::collections::HashMap;
use std::sync::Arc;

use crate::blockcore::{BlockPartition, BlockTerm, BlockVector, CompositeProblem, SmoothFunction};
use crate::error::{Error, Result};
use crate::subsolvers::{AffineDemand, ElasticDemandBlock, InverseDemand};

/// Enumeration stops with an error past this many paths for one pair.
pub const MAX_PATHS_PER_PAIR: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcSpec {
    pub from: usize,
    pub to: usize,
    /// Free-flow cost.
    pub a0: f64,
    /// Cost slope.
    pub a1: f64,
}

impl ArcSpec {
    pub fn cost(&self, flow: f64) -> f64 {
        self.a0 + self.a1 * flow
    }

    fn integral(&self, flow: f64) -> f64 {
        self.a0 * flow + 0.5 * self.a1 * flow * flow
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdPair {
    pub origin: usize,
    pub destination: usize,
    pub demand: AffineDemand,
    pub cap: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NetworkSpec {
    pub nodes: Vec<String>,
    pub arcs: Vec<ArcSpec>,
    pub pairs: Vec<OdPair>,
}

fn parse_num(tok: Option<&str>, what: &str, lineno: usize) -> Result<f64> {
    let tok = tok.ok_or_else(|| Error::InvalidParameter(format!("line {lineno}: missing {what}")))?;
    tok.parse()
        .map_err(|_| Error::InvalidParameter(format!("line {lineno}: bad {what} {tok:?}")))
}

impl NetworkSpec {
    /// Parses the line format
    /// `node <id>`, `arc <from> <to> <a0> <a1>`,
    /// `od <origin> <dest> <tau0> <tau_slope> <gamma>`, with `#` comments.
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = NetworkSpec::default();
        let mut ids: HashMap<String, usize> = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let mut toks = line.split_whitespace();
            let kind = toks.next().unwrap();
            let node = |tok: Option<&str>, ids: &HashMap<String, usize>| -> Result<usize> {
                let tok = tok.ok_or_else(|| Error::InvalidParameter(format!("line {lineno}: missing node")))?;
                ids.get(tok)
                    .copied()
                    .ok_or_else(|| Error::InvalidParameter(format!("line {lineno}: unknown node {tok:?}")))
            };
            match kind {
                "node" => {
                    let id = toks
                        .next()
                        .ok_or_else(|| Error::InvalidParameter(format!("line {lineno}: missing node id")))?;
                    if ids.insert(id.to_string(), spec.nodes.len()).is_some() {
                        return Err(Error::InvalidParameter(format!("line {lineno}: duplicate node {id:?}")));
                    }
                    spec.nodes.push(id.to_string());
                }
                "arc" => {
                    let from = node(toks.next(), &ids)?;
                    let to = node(toks.next(), &ids)?;
                    let a0 = parse_num(toks.next(), "a0", lineno)?;
                    let a1 = parse_num(toks.next(), "a1", lineno)?;
                    spec.arcs.push(ArcSpec { from, to, a0, a1 });
                }
                "od" => {
                    let origin = node(toks.next(), &ids)?;
                    let destination = node(toks.next(), &ids)?;
                    let intercept = parse_num(toks.next(), "tau0", lineno)?;
                    let slope = parse_num(toks.next(), "tau_slope", lineno)?;
                    let cap = parse_num(toks.next(), "gamma", lineno)?;
                    spec.pairs.push(OdPair {
                        origin,
                        destination,
                        demand: AffineDemand { intercept, slope },
                        cap,
                    });
                }
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "line {lineno}: unknown record {other:?}"
                    )));
                }
            }
            if toks.next().is_some() {
                return Err(Error::InvalidParameter(format!("line {lineno}: trailing fields")));
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        for (i, a) in self.arcs.iter().enumerate() {
            if a.from >= self.nodes.len() || a.to >= self.nodes.len() {
                return Err(Error::DimensionMismatch(format!("arc {i} references a missing node")));
            }
            if !(a.a0 >= 0.0 && a.a1 >= 0.0) {
                return Err(Error::InvalidParameter(format!("arc {i} needs a0 >= 0 and a1 >= 0")));
            }
        }
        for (m, p) in self.pairs.iter().enumerate() {
            if p.origin >= self.nodes.len() || p.destination >= self.nodes.len() {
                return Err(Error::DimensionMismatch(format!("pair {m} references a missing node")));
            }
            if !(p.cap >= 0.0 && p.cap.is_finite()) {
                return Err(Error::InvalidParameter(format!("pair {m} needs a finite cap >= 0")));
            }
            if p.cap > 0.0 && p.demand.slope.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
                return Err(Error::NonMonotoneDemand);
            }
        }
        Ok(())
    }

    /// All simple paths of each pair, as arc index lists, in depth-first order
    /// over arcs as listed.
    pub fn enumerate_paths(&self) -> Result<Vec<Vec<Vec<usize>>>> {
        let mut out_arcs: Vec<Vec<usize>> = vec![Vec::new(); self.nodes.len()];
        for (i, a) in self.arcs.iter().enumerate() {
            out_arcs[a.from].push(i);
        }
        self.pairs
            .iter()
            .enumerate()
            .map(|(m, pair)| {
                let mut paths = Vec::new();
                let mut visited = vec![false; self.nodes.len()];
                let mut stack = Vec::new();
                visited[pair.origin] = true;
                self.dfs(
                    pair.origin,
                    pair.destination,
                    &out_arcs,
                    &mut visited,
                    &mut stack,
                    &mut paths,
                )?;
                if paths.is_empty() {
                    return Err(Error::DisconnectedPair(m));
                }
                Ok(paths)
            })
            .collect()
    }

    fn dfs(
        &self,
        at: usize,
        dest: usize,
        out_arcs: &[Vec<usize>],
        visited: &mut [bool],
        stack: &mut Vec<usize>,
        paths: &mut Vec<Vec<usize>>,
    ) -> Result<()> {
        if at == dest {
            if !stack.is_empty() {
                paths.push(stack.clone());
            }
            return Ok(());
        }
        for &a in &out_arcs[at] {
            let next = self.arcs[a].to;
            if visited[next] {
                continue;
            }
            if paths.len() >= MAX_PATHS_PER_PAIR {
                return Err(Error::InvalidParameter("too many paths to enumerate".into()));
            }
            visited[next] = true;
            stack.push(a);
            self.dfs(next, dest, out_arcs, visited, stack, paths)?;
            stack.pop();
            visited[next] = false;
        }
        Ok(())
    }
}

/// Cost of every enumerated path under `arc_flows`.
pub fn path_costs(arcs: &[ArcSpec], paths: &[Vec<usize>], arc_flows: &[f64]) -> Vec<f64> {
    paths
        .iter()
        .map(|p| p.iter().map(|&a| arcs[a].cost(arc_flows[a])).sum())
        .collect()
}

/// Cheapest enumerated path of each pair and its cost.
pub fn shortest_path_costs(
    spec: &NetworkSpec,
    paths: &[Vec<Vec<usize>>],
    arc_flows: &[f64],
) -> Result<Vec<(usize, f64)>> {
    paths
        .iter()
        .enumerate()
        .map(|(m, ps)| {
            path_costs(&spec.arcs, ps, arc_flows)
                .into_iter()
                .enumerate()
                .fold(None, |best: Option<(usize, f64)>, (i, c)| match best {
                    Some((_, b)) if b <= c => best,
                    _ => Some((i, c)),
                })
                .ok_or(Error::DisconnectedPair(m))
        })
        .collect()
}

struct ArcCostPotential {
    arcs: Vec<ArcSpec>,
    /// Arcs of the path behind each coordinate; `None` for demand coordinates.
    coordinate_paths: Vec<Option<Vec<usize>>>,
}

impl ArcCostPotential {
    fn arc_flows(&self, x: &[f64]) -> Vec<f64> {
        let mut f = vec![0.0; self.arcs.len()];
        for (u, path) in x.iter().zip(&self.coordinate_paths) {
            if let Some(path) = path {
                for &a in path {
                    f[a] += u;
                }
            }
        }
        f
    }
}

impl SmoothFunction for ArcCostPotential {
    fn value(&self, x: &BlockVector) -> f64 {
        let f = self.arc_flows(x.as_slice());
        self.arcs.iter().zip(&f).map(|(a, &fa)| a.integral(fa)).sum()
    }

    fn partial_gradient(&self, x: &BlockVector, block: usize) -> Vec<f64> {
        let f = self.arc_flows(x.as_slice());
        self.coordinate_paths[x.partition().range(block)]
            .iter()
            .map(|p| {
                p.as_ref()
                    .map_or(0.0, |p| p.iter().map(|&a| self.arcs[a].cost(f[a])).sum())
            })
            .collect()
    }
}

/// Equilibrium conditions of one pair at a given point.
#[derive(Debug, Clone, PartialEq)]
pub struct PairReport {
    pub demand: f64,
    /// Shortest path cost.
    pub lambda: f64,
    pub path_flows: Vec<f64>,
    pub path_costs: Vec<f64>,
    /// Natural residual of the path and demand complementarity conditions.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumReport {
    pub arc_flows: Vec<f64>,
    pub arc_costs: Vec<f64>,
    pub pairs: Vec<PairReport>,
    pub max_residual: f64,
}

/// A network equilibrium instance ready for the solvers.
pub struct NetworkModel {
    pub spec: NetworkSpec,
    pub paths: Vec<Vec<Vec<usize>>>,
    pub problem: CompositeProblem,
}

impl NetworkModel {
    pub fn arc_flows(&self, x: &BlockVector) -> Vec<f64> {
        let mut f = vec![0.0; self.spec.arcs.len()];
        for (m, ps) in self.paths.iter().enumerate() {
            for (u, p) in x.block(m).iter().zip(ps) {
                for &a in p {
                    f[a] += u;
                }
            }
        }
        f
    }

    /// The all-zero flow, always feasible.
    pub fn start_point(&self) -> BlockVector {
        BlockVector::zeros(self.problem.partition().clone())
    }

    /// Residuals of the equilibrium conditions with `lambda_m` the shortest
    /// path cost. For a path, `|min(u_p, g_p - lambda)|`; for the demand, the
    /// box residual `|v - clamp(v - (lambda - tau(v)), 0, cap)|`.
    pub fn equilibrium_report(&self, x: &BlockVector) -> EquilibriumReport {
        let f = self.arc_flows(x);
        let arc_costs: Vec<f64> = self.spec.arcs.iter().zip(&f).map(|(a, &fa)| a.cost(fa)).collect();
        let mut pairs = Vec::with_capacity(self.paths.len());
        for (m, ps) in self.paths.iter().enumerate() {
            let pair = &self.spec.pairs[m];
            let block = x.block(m);
            let k = ps.len();
            let costs = path_costs(&self.spec.arcs, ps, &f);
            let lambda = costs.iter().copied().fold(f64::INFINITY, f64::min);
            let demand = block[k];
            let mut residual: f64 = 0.0;
            for (u, c) in block[..k].iter().zip(&costs) {
                residual = residual.max(u.min(c - lambda).abs());
            }
            let excess = lambda - pair.demand.value(demand);
            let projected = (demand - excess).clamp(0.0, pair.cap);
            residual = residual.max((demand - projected).abs());
            pairs.push(PairReport {
                demand,
                lambda,
                path_flows: block[..k].to_vec(),
                path_costs: costs,
                residual,
            });
        }
        let max_residual = pairs.iter().map(|p| p.residual).fold(0.0, f64::max);
        EquilibriumReport {
            arc_flows: f,
            arc_costs,
            pairs,
            max_residual,
        }
    }
}

pub fn build_network_problem(spec: &NetworkSpec) -> Result<NetworkModel> {
    spec.validate()?;
    if spec.pairs.is_empty() {
        return Err(Error::DimensionMismatch("network has no O/D pairs".into()));
    }
    let paths = spec.enumerate_paths()?;
    let sizes: Vec<usize> = paths.iter().map(|p| p.len() + 1).collect();
    let partition = Arc::new(BlockPartition::new(sizes)?);
    let mut coordinate_paths = Vec::with_capacity(partition.total());
    let mut terms: Vec<Box<dyn BlockTerm>> = Vec::with_capacity(paths.len());
    let mut lipschitz = Vec::with_capacity(paths.len());
    for (ps, pair) in paths.iter().zip(&spec.pairs) {
        coordinate_paths.extend(ps.iter().cloned().map(Some));
        coordinate_paths.push(None);
        let demand: Arc<dyn InverseDemand> = Arc::new(pair.demand);
        terms.push(Box::new(ElasticDemandBlock::new(ps.len(), demand, pair.cap)?));
        // Hessian entry (p, p') = sum of a1 over shared arcs
        let mut fro = 0.0;
        for p in ps {
            for q in ps {
                let shared: f64 = p.iter().filter(|a| q.contains(a)).map(|&a| spec.arcs[a].a1).sum();
                fro += shared * shared;
            }
        }
        lipschitz.push(fro.sqrt());
    }
    let potential = ArcCostPotential {
        arcs: spec.arcs.clone(),
        coordinate_paths,
    };
    let problem = CompositeProblem::new(partition, potential, terms)?
        .with_lipschitz(lipschitz)?
        .declare_convex();
    Ok(NetworkModel {
        spec: spec.clone(),
        paths,
        problem,
    })
}
