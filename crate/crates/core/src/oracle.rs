//! Independent references for the policy and the dynamics.
//!
//! - [`grid_argmax`] scans the content gain on a dense grid.
//! - [`brute_force_control`] enumerates piecewise-constant agent paths on
//!   tiny networks.
//! - [`counterexample_suite`] recomputes the published non-submodularity
//!   instances and searches for a small instance where adding agents hurts.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{advance, final_opinions, silent, ModelParams, DEFAULT_SUBSTEP};
use crate::error::{Error, Result};
use crate::network::{Edge, Network};
use crate::objectives::{mean, ObjectiveKind};
use crate::policy::{content_gain, make_policy, PolicyFamily, PolicyParams, StaticPolicy};
use crate::targeting::{greedy_targets, TargetMatrix, TargetingConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub case: String,
    pub values: Vec<f64>,
    /// Published values, empty when there is nothing to compare against.
    pub paper_values: Vec<f64>,
    /// Absolute tolerance on `values` vs `paper_values`; 0 for exact checks.
    pub tolerance: f64,
    pub passed: bool,
    /// Informational reports never fail the suite.
    pub gate: bool,
    pub detail: String,
}

impl OracleReport {
    fn compare(case: &str, values: Vec<f64>, paper_values: Vec<f64>, tolerance: f64, gate: bool) -> Self {
        let worst = values
            .iter()
            .zip(&paper_values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        OracleReport {
            case: case.to_string(),
            passed: values.len() == paper_values.len() && worst <= tolerance,
            values,
            paper_values,
            tolerance,
            gate,
            detail: format!("max abs error {worst:.3e}"),
        }
    }

    fn check(case: &str, values: Vec<f64>, passed: bool, gate: bool, detail: String) -> Self {
        OracleReport {
            case: case.to_string(),
            values,
            paper_values: Vec::new(),
            tolerance: 0.0,
            passed,
            gate,
            detail,
        }
    }

    pub fn failed_gate(&self) -> bool {
        self.gate && !self.passed
    }
}

// ---------------------------------------------------------------------------
// grid scan

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridArgmax {
    pub u: f64,
    pub value: f64,
    /// Every grid point scored the same (for instance all windows closed).
    pub all_tied: bool,
}

/// Best point of `lo, lo + resolution, ..., hi` for the content gain.
/// The first grid point wins ties.
pub fn grid_argmax(
    weights: &[f64],
    target_thetas: &[f64],
    interval: (f64, f64),
    model: &ModelParams,
    resolution: f64,
) -> Result<GridArgmax> {
    let (lo, hi) = interval;
    if !(resolution > 0.0 && resolution <= 1e-4) {
        return Err(Error::InvalidParameter(format!(
            "grid resolution must be in (0, 1e-4], got {resolution}"
        )));
    }
    if !(lo <= hi) {
        return Err(Error::InvalidParameter(format!("empty interval [{lo}, {hi}]")));
    }
    let steps = ((hi - lo) / resolution).ceil() as usize;
    let mut best = GridArgmax {
        u: lo,
        value: content_gain(lo, weights, target_thetas, model),
        all_tied: true,
    };
    for k in 1..=steps {
        let u = (lo + k as f64 * resolution).min(hi);
        let v = content_gain(u, weights, target_thetas, model);
        if v != best.value {
            best.all_tied = false;
        }
        if v > best.value {
            best.u = u;
            best.value = v;
        }
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// exhaustive control search

pub const BRUTE_MAX_NODES: usize = 4;
pub const BRUTE_MAX_HORIZON: usize = 6;
pub const BRUTE_MAX_PATHS: f64 = 1e7;

#[derive(Debug, Clone, PartialEq)]
pub struct ControlSolution {
    /// Agent opinion on `[t, t+1)`.
    pub path: Vec<f64>,
    pub objective: f64,
}

/// Exhaustive search over one agent's opinion paths with values in `levels`.
/// Among equally good paths the first in lexicographic level order wins.
pub fn brute_force_control(
    network: &Network,
    targets: &[usize],
    kind: ObjectiveKind,
    horizon: usize,
    levels: &[f64],
    model: &ModelParams,
) -> Result<ControlSolution> {
    if network.node_count() > BRUTE_MAX_NODES {
        return Err(Error::SearchSpace(format!(
            "{} nodes, at most {BRUTE_MAX_NODES} allowed",
            network.node_count()
        )));
    }
    if horizon == 0 || horizon > BRUTE_MAX_HORIZON {
        return Err(Error::SearchSpace(format!(
            "horizon {horizon} outside 1..={BRUTE_MAX_HORIZON}"
        )));
    }
    if levels.is_empty() || (levels.len() as f64).powi(horizon as i32) > BRUTE_MAX_PATHS {
        return Err(Error::SearchSpace(format!(
            "{}^{horizon} paths exceed the bound of {BRUTE_MAX_PATHS}",
            levels.len()
        )));
    }
    if let Some(bad) = levels.iter().find(|&&l| !(l >= model.u_min && l <= model.u_max)) {
        return Err(Error::InvalidParameter(format!("level {bad} outside the opinion bounds")));
    }
    model.validate()?;
    let x = TargetMatrix::new(vec![targets.to_vec()])?;

    let search = |first: usize| -> Result<ControlSolution> {
        let mut theta = network.initial_opinions().to_vec();
        advance(network, &mut theta, &x, &[Some(levels[first])], DEFAULT_SUBSTEP, model)?;
        let mut path = vec![levels[first]];
        let mut best = ControlSolution {
            path: Vec::new(),
            objective: f64::NEG_INFINITY,
        };
        dfs(network, &x, kind, horizon, levels, model, &theta, &mut path, &mut best)?;
        Ok(best)
    };
    let per_first: Vec<Result<ControlSolution>> = (0..levels.len()).into_par_iter().map(search).collect();
    let mut best: Option<ControlSolution> = None;
    for sol in per_first {
        let sol = sol?;
        if best.as_ref().is_none_or(|b| sol.objective > b.objective) {
            best = Some(sol);
        }
    }
    Ok(best.expect("levels is nonempty"))
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    network: &Network,
    x: &TargetMatrix,
    kind: ObjectiveKind,
    horizon: usize,
    levels: &[f64],
    model: &ModelParams,
    theta: &[f64],
    path: &mut Vec<f64>,
    best: &mut ControlSolution,
) -> Result<()> {
    if path.len() == horizon {
        let r = kind.evaluate(theta)?;
        if r > best.objective {
            best.objective = r;
            best.path = path.clone();
        }
        return Ok(());
    }
    for &u in levels {
        let mut next = theta.to_vec();
        advance(network, &mut next, x, &[Some(u)], DEFAULT_SUBSTEP, model)?;
        path.push(u);
        dfs(network, x, kind, horizon, levels, model, &next, path, best)?;
        path.pop();
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// published counterexamples

/// Variance with divisor `n`.
pub fn population_variance(theta: &[f64]) -> f64 {
    let mu = mean(theta);
    theta.iter().map(|t| (t - mu) * (t - mu)).sum::<f64>() / theta.len() as f64
}

const CASE_A_PAPER: [f64; 4] = [0.9059, 0.9111, 0.9068, 0.9124];
const CASE_A_TOL: f64 = 2e-3;
const CASE_B_PAPER: [f64; 4] = [0.00003496, 0.00004669, 0.00012825, 0.00014155];
const CASE_B_TOL: f64 = 5e-6;

fn counterexample_model(agent_rate: f64) -> ModelParams {
    ModelParams {
        epsilon: 0.1,
        omega: 0.003,
        u_min: 0.0,
        u_max: 1.0,
        lambda_max: agent_rate,
    }
}

/// Final opinions with one agent holding opinion 1 toward `targets`.
fn fixed_agent_final(network: &Network, targets: &[usize], horizon: usize, model: &ModelParams) -> Result<Vec<f64>> {
    let x = TargetMatrix::new(vec![targets.to_vec()])?;
    let mut pol = StaticPolicy { opinion: 1.0 };
    final_opinions(network, &x, &mut pol, horizon, DEFAULT_SUBSTEP, model)
}

/// Two-node instance: node 0 posts 100 times per unit time, node 1 once.
pub fn case_a_network(edges: &[(usize, usize)]) -> Result<Network> {
    let rate = [100.0, 1.0];
    let edges = edges
        .iter()
        .map(|&(s, t)| Edge { source: s, target: t, rate: rate[s] })
        .collect();
    Network::new(vec![0.91, 0.89], edges)
}

/// Objective means for target sets ∅, {0}, {1}, {0,1}.
pub fn case_a_values(network: &Network, agent_rate: f64) -> Result<Vec<f64>> {
    let model = counterexample_model(agent_rate);
    [&[][..], &[0][..], &[1][..], &[0, 1][..]]
        .iter()
        .map(|s| Ok(mean(&fixed_agent_final(network, s, 3, &model)?)))
        .collect()
}

/// Four-node bidirectional path; each node posts to its neighbours at its own rate.
pub fn case_b_network() -> Result<Network> {
    let rate = [1.0, 1.0, 100.0, 1.0];
    let mut edges = Vec::new();
    for i in 0..3 {
        edges.push(Edge { source: i, target: i + 1, rate: rate[i] });
        edges.push(Edge { source: i + 1, target: i, rate: rate[i + 1] });
    }
    Network::new(vec![0.90, 0.92, 0.94, 0.96], edges)
}

/// Final variances under an opinion-1 agent at rate 10 and horizon 10.
pub fn case_b_values(sets: &[&[usize]], variance: fn(&[f64]) -> f64) -> Result<Vec<f64>> {
    let net = case_b_network()?;
    let model = counterexample_model(10.0);
    sets.iter()
        .map(|s| Ok(variance(&fixed_agent_final(&net, s, 10, &model)?)))
        .collect()
}

fn sample_var(theta: &[f64]) -> f64 {
    population_variance(theta) * theta.len() as f64 / (theta.len() - 1) as f64
}

/// `r(A∪{x}) − r(A) < r(B∪{x}) − r(B)` for values ordered A, B, A∪{x}, B∪{x}.
fn supermodular_gain(v: &[f64]) -> (f64, f64) {
    (v[2] - v[0], v[3] - v[1])
}

fn case_a_reports() -> Result<Vec<OracleReport>> {
    let mut out = Vec::new();
    let mutual = case_a_network(&[(0, 1), (1, 0)])?;
    let values = case_a_values(&mutual, 10.0)?;
    let (ga, gb) = supermodular_gain(&values);
    out.push(OracleReport::compare("a/mean/mutual/agent-rate-10", values.clone(), CASE_A_PAPER.to_vec(), CASE_A_TOL, true));
    out.push(OracleReport::check(
        "a/mean/inequality",
        vec![ga, gb],
        ga < gb,
        true,
        format!("r(A+1)-r(A) = {ga:.6} vs r(B+1)-r(B) = {gb:.6}"),
    ));

    // the rate stated alongside the instance, and one-directional topologies
    type Variant<'a> = (&'a str, &'a [(usize, usize)], f64);
    let variants: [Variant; 5] = [
        ("a/mean/mutual/agent-rate-1", &[(0, 1), (1, 0)], 1.0),
        ("a/mean/0-to-1/agent-rate-1", &[(0, 1)], 1.0),
        ("a/mean/1-to-0/agent-rate-1", &[(1, 0)], 1.0),
        ("a/mean/0-to-1/agent-rate-10", &[(0, 1)], 10.0),
        ("a/mean/1-to-0/agent-rate-10", &[(1, 0)], 10.0),
    ];
    for (name, edges, rate) in variants {
        let v = case_a_values(&case_a_network(edges)?, rate)?;
        out.push(OracleReport::compare(name, v, CASE_A_PAPER.to_vec(), CASE_A_TOL, false));
    }
    Ok(out)
}

/// Target sets of the variance-vs-count sweep, 0 to 4 targets.
pub const CASE_B_COUNT_SWEEP: [&[usize]; 5] = [&[], &[0], &[0, 1], &[1, 2, 3], &[0, 1, 2, 3]];

fn is_monotone(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] >= w[0]) || v.windows(2).all(|w| w[1] <= w[0])
}

fn case_b_reports() -> Result<Vec<OracleReport>> {
    let sets: [&[usize]; 4] = [&[0], &[0, 1], &[0, 2], &[0, 1, 2]];
    let pop = case_b_values(&sets, population_variance)?;
    let (ga, gb) = supermodular_gain(&pop);
    let sweep = case_b_values(&CASE_B_COUNT_SWEEP, population_variance)?;
    let sample = case_b_values(&sets, sample_var)?;
    Ok(vec![
        OracleReport::compare("b/variance/population", pop, CASE_B_PAPER.to_vec(), CASE_B_TOL, true),
        OracleReport::check(
            "b/variance/inequality",
            vec![ga, gb],
            ga < gb,
            true,
            format!("r(A+2)-r(A) = {ga:.3e} vs r(B+2)-r(B) = {gb:.3e}"),
        ),
        OracleReport::check(
            "b/variance/non-monotone-in-count",
            sweep.clone(),
            !is_monotone(&sweep),
            true,
            format!("variance for 0..4 targets: {sweep:?}"),
        ),
        OracleReport::compare("b/variance/sample", sample, CASE_B_PAPER.to_vec(), CASE_B_TOL, false),
    ])
}

// ---------------------------------------------------------------------------
// adding agents can hurt

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessSearch {
    pub seed: u64,
    pub max_instances: usize,
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub max_agents: usize,
    pub targeting_horizon: usize,
    pub eval_horizon: usize,
    pub gamma: f64,
}

impl Default for WitnessSearch {
    fn default() -> Self {
        WitnessSearch {
            seed: 1,
            max_instances: 5000,
            min_nodes: 4,
            max_nodes: 6,
            max_agents: 3,
            targeting_horizon: 5,
            eval_horizon: 40,
            gamma: 0.01,
        }
    }
}

/// A small instance where the greedy pipeline with `agents_more` agents ends
/// strictly below the same pipeline with `agents_fewer`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentCountWitness {
    pub instance: usize,
    pub opinions: Vec<f64>,
    pub edges: Vec<(usize, usize, f64)>,
    pub objective: ObjectiveKind,
    pub d_max: usize,
    pub targeting_horizon: usize,
    pub eval_horizon: usize,
    pub gamma: f64,
    pub model: ModelParams,
    pub agents_fewer: usize,
    pub agents_more: usize,
    pub targets_fewer: Vec<Vec<usize>>,
    pub targets_more: Vec<Vec<usize>>,
    pub objective_fewer: f64,
    pub objective_more: f64,
}

impl AgentCountWitness {
    pub fn network(&self) -> Result<Network> {
        let edges = self
            .edges
            .iter()
            .map(|&(source, target, rate)| Edge { source, target, rate })
            .collect();
        Network::new(self.opinions.clone(), edges)
    }

    /// Reruns both pipelines and returns their final objectives.
    pub fn replay(&self) -> Result<(f64, f64)> {
        let net = self.network()?;
        let inst = Instance {
            network: net,
            kind: self.objective,
            d_max: self.d_max,
        };
        let fewer = pipeline(&inst, self.agents_fewer, self.targeting_horizon, self.eval_horizon, self.gamma, &self.model)?;
        let more = pipeline(&inst, self.agents_more, self.targeting_horizon, self.eval_horizon, self.gamma, &self.model)?;
        Ok((fewer.1, more.1))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let body = serde_json::to_string_pretty(self)?;
        std::fs::write(path, body + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let body = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&body)?)
    }
}

struct Instance {
    network: Network,
    kind: ObjectiveKind,
    d_max: usize,
}

fn random_instance(rng: &mut ChaCha8Rng, search: &WitnessSearch) -> Result<Instance> {
    let n = rng.gen_range(search.min_nodes..=search.max_nodes);
    // clustered so that most pairs start inside each other's window
    let center = rng.gen_range(0.2..0.8);
    let opinions = (0..n)
        .map(|_| (center + rng.gen_range(-0.15..0.15f64)).clamp(0.0, 1.0))
        .collect();
    let mut edges = Vec::new();
    for s in 0..n {
        for t in 0..n {
            if s != t && rng.gen_bool(0.4) {
                let rate = [1.0, 10.0, 100.0][rng.gen_range(0..3)];
                edges.push(Edge { source: s, target: t, rate });
            }
        }
    }
    let kind = ObjectiveKind::ALL[rng.gen_range(0..3)];
    let d_max = rng.gen_range(1..=2);
    Ok(Instance {
        network: Network::new(opinions, edges)?,
        kind,
        d_max,
    })
}

/// Greedy targeting over the short horizon, nudging evaluation over the long one.
fn pipeline(
    inst: &Instance,
    agents: usize,
    targeting_horizon: usize,
    eval_horizon: usize,
    gamma: f64,
    model: &ModelParams,
) -> Result<(TargetMatrix, f64)> {
    let policy = PolicyParams { gamma };
    let x = if agents == 0 {
        TargetMatrix::empty(0)
    } else {
        let cfg = TargetingConfig {
            d_max: inst.d_max,
            consideration_size: inst.network.node_count(),
            horizon: targeting_horizon,
            family: PolicyFamily::Nudging,
            substep: DEFAULT_SUBSTEP,
        };
        greedy_targets(&inst.network, inst.kind, agents, &cfg, model, &policy)?
    };
    let theta = if agents == 0 {
        final_opinions(&inst.network, &x, &mut silent, eval_horizon, DEFAULT_SUBSTEP, model)?
    } else {
        let mut pol = make_policy(PolicyFamily::Nudging, inst.kind, policy, &x, model);
        final_opinions(&inst.network, &x, pol.as_mut(), eval_horizon, DEFAULT_SUBSTEP, model)?
    };
    Ok((x, inst.kind.evaluate(&theta)?))
}

/// Seeded search; returns the first witness in instance order.
pub fn find_agent_count_witness(search: &WitnessSearch) -> Result<Option<AgentCountWitness>> {
    let model = ModelParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(search.seed);
    for instance in 0..search.max_instances {
        let inst = random_instance(&mut rng, search)?;
        let runs: Vec<(TargetMatrix, f64)> = (1..=search.max_agents)
            .map(|k| pipeline(&inst, k, search.targeting_horizon, search.eval_horizon, search.gamma, &model))
            .collect::<Result<_>>()?;
        for k in 0..runs.len() - 1 {
            let (fewer, more) = (&runs[k], &runs[k + 1]);
            let margin = 1e-9 * fewer.1.abs().max(1e-6);
            if more.1 < fewer.1 - margin {
                return Ok(Some(AgentCountWitness {
                    instance,
                    opinions: inst.network.initial_opinions().to_vec(),
                    edges: inst.network.edges().iter().map(|e| (e.source, e.target, e.rate)).collect(),
                    objective: inst.kind,
                    d_max: inst.d_max,
                    targeting_horizon: search.targeting_horizon,
                    eval_horizon: search.eval_horizon,
                    gamma: search.gamma,
                    model,
                    agents_fewer: k + 1,
                    agents_more: k + 2,
                    targets_fewer: fewer.0.rows().to_vec(),
                    targets_more: more.0.rows().to_vec(),
                    objective_fewer: fewer.1,
                    objective_more: more.1,
                }));
            }
        }
    }
    Ok(None)
}

fn case_c_report(witness: &Option<AgentCountWitness>) -> OracleReport {
    match witness {
        Some(w) => OracleReport::check(
            "c/more-agents-worse",
            vec![w.objective_fewer, w.objective_more],
            w.objective_more < w.objective_fewer,
            true,
            format!(
                "instance {} ({}, {} nodes): {} agents {:.6e} vs {} agents {:.6e}",
                w.instance,
                w.objective,
                w.opinions.len(),
                w.agents_fewer,
                w.objective_fewer,
                w.agents_more,
                w.objective_more
            ),
        ),
        None => OracleReport::check("c/more-agents-worse", Vec::new(), false, true, "no witness found".into()),
    }
}

/// All counterexample reports plus the witness (if one was found).
pub fn counterexample_suite_with_witness(search: &WitnessSearch) -> Result<(Vec<OracleReport>, Option<AgentCountWitness>)> {
    let mut reports = case_a_reports()?;
    reports.extend(case_b_reports()?);
    let witness = find_agent_count_witness(search)?;
    reports.push(case_c_report(&witness));
    Ok((reports, witness))
}

pub fn counterexample_suite() -> Result<Vec<OracleReport>> {
    counterexample_suite_with_witness(&WitnessSearch::default()).map(|(r, _)| r)
}
