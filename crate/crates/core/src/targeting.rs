//! Greedy selection of each agent's target set.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{final_opinions, silent, ModelParams, DEFAULT_SUBSTEP};
use crate::error::{Error, Result};
use crate::network::Network;
use crate::objectives::ObjectiveKind;
use crate::policy::{make_policy, PolicyFamily, PolicyParams};

/// Per-agent target node sets, pairwise disjoint.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetMatrix {
    rows: Vec<Vec<usize>>,
}

impl TargetMatrix {
    pub fn new(rows: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = std::collections::HashMap::new();
        for (a, row) in rows.iter().enumerate() {
            for &node in row {
                if let Some(prev) = seen.insert(node, a) {
                    return Err(Error::InvalidParameter(format!(
                        "node {node} is targeted by agents {prev} and {a}"
                    )));
                }
            }
        }
        Ok(TargetMatrix { rows })
    }

    /// `n_agents` agents without targets.
    pub fn empty(n_agents: usize) -> Self {
        TargetMatrix {
            rows: vec![Vec::new(); n_agents],
        }
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn agent_count(&self) -> usize {
        self.rows.len()
    }

    pub fn row_len(&self, agent: usize) -> usize {
        self.rows[agent].len()
    }

    pub fn target_count(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// `(agent, node)` pairs in agent order, then selection order.
    pub fn assignments(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(a, row)| row.iter().map(move |&n| (a, n)))
    }

    pub fn check_budget(&self, d_max: usize) -> Result<()> {
        match self.rows.iter().position(|r| r.len() > d_max) {
            Some(a) => Err(Error::InvalidParameter(format!(
                "agent {a} has {} targets, budget is {d_max}",
                self.rows[a].len()
            ))),
            None => Ok(()),
        }
    }

    fn with_candidate(&self, agent: usize, node: usize) -> TargetMatrix {
        let mut rows = self.rows.clone();
        rows[agent].push(node);
        TargetMatrix { rows }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetingConfig {
    pub d_max: usize,
    pub consideration_size: usize,
    /// Unit-time steps simulated per candidate evaluation.
    pub horizon: usize,
    pub family: PolicyFamily,
    pub substep: f64,
}

impl Default for TargetingConfig {
    fn default() -> Self {
        TargetingConfig {
            d_max: 100,
            consideration_size: 1000,
            horizon: 30,
            family: PolicyFamily::Nudging,
            substep: DEFAULT_SUBSTEP,
        }
    }
}

impl TargetingConfig {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.d_max < 1 {
            bad.push("d_max must be at least 1".to_string());
        }
        if self.consideration_size < 1 {
            bad.push("consideration_size must be at least 1".to_string());
        }
        if self.horizon < 1 {
            bad.push("targeting horizon must be at least 1".to_string());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(bad.join("; ")))
        }
    }
}

/// Candidate pool, best first.
pub fn consideration_set(network: &Network, size: usize) -> Vec<usize> {
    network.top_out_degree(size)
}

/// Outcome of a targeting run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetingReport {
    pub targets: TargetMatrix,
    /// Objective after `horizon` steps with no agents.
    pub baseline_objective: f64,
    /// Objective of the accepted target matrix (the final r*).
    pub best_objective: f64,
    /// Number of candidate simulations run.
    pub evaluations: usize,
}

/// Dynamics used while evaluating candidates: the DeGroot family assumes
/// linear dynamics.
pub fn targeting_model(family: PolicyFamily, model: &ModelParams) -> ModelParams {
    match family {
        PolicyFamily::Nudging => *model,
        PolicyFamily::Degroot => model.linear(),
    }
}

pub fn greedy_targets(
    network: &Network,
    kind: ObjectiveKind,
    n_agents: usize,
    cfg: &TargetingConfig,
    model: &ModelParams,
    policy: &PolicyParams,
) -> Result<TargetMatrix> {
    greedy_targets_with_report(network, kind, n_agents, cfg, model, policy).map(|r| r.targets)
}

/// Agents are processed in id order, candidates in consideration-set order.
/// A candidate is kept iff it strictly raises the shared incumbent `r*`,
/// which starts at the no-agent objective.
///
/// Candidates are simulated speculatively in parallel batches; results past
/// the first acceptance in a batch are discarded, so the outcome equals the
/// sequential loop.
pub fn greedy_targets_with_report(
    network: &Network,
    kind: ObjectiveKind,
    n_agents: usize,
    cfg: &TargetingConfig,
    model: &ModelParams,
    policy: &PolicyParams,
) -> Result<TargetingReport> {
    cfg.validate()?;
    policy.validate()?;
    if n_agents == 0 {
        return Err(Error::InvalidParameter("targeting needs at least one agent".into()));
    }
    let pool = consideration_set(network, cfg.consideration_size);
    if pool.is_empty() {
        return Err(Error::InvalidParameter("consideration set is empty".into()));
    }
    let sim_model = targeting_model(cfg.family, model);
    sim_model.validate()?;

    let evaluate = |x: &TargetMatrix| -> Result<f64> {
        let mut pol = make_policy(cfg.family, kind, *policy, x, &sim_model);
        let theta = final_opinions(network, x, pol.as_mut(), cfg.horizon, cfg.substep, &sim_model)?;
        kind.evaluate(&theta)
    };

    let baseline = {
        let none = TargetMatrix::empty(n_agents);
        let theta = final_opinions(network, &none, &mut silent, cfg.horizon, cfg.substep, &sim_model)?;
        kind.evaluate(&theta)?
    };

    let mut x = TargetMatrix::empty(n_agents);
    let mut taken = vec![false; network.node_count()];
    let mut r_star = baseline;
    let mut evaluations = 0;
    let batch = rayon::current_num_threads().max(1);

    for agent in 0..n_agents {
        let candidates: Vec<usize> = pool.iter().copied().filter(|&i| !taken[i]).collect();
        let mut next = 0;
        while next < candidates.len() && x.row_len(agent) < cfg.d_max {
            let end = (next + batch).min(candidates.len());
            let scores: Vec<Result<f64>> = candidates[next..end]
                .par_iter()
                .map(|&c| evaluate(&x.with_candidate(agent, c)))
                .collect();
            let mut advanced = end;
            for (k, score) in scores.into_iter().enumerate() {
                evaluations += 1;
                let r = score?;
                if r > r_star {
                    let c = candidates[next + k];
                    log::debug!("agent {agent} takes node {c}: r* {r_star} -> {r}");
                    x.rows[agent].push(c);
                    taken[c] = true;
                    r_star = r;
                    advanced = next + k + 1;
                    break;
                }
            }
            next = advanced;
        }
    }

    Ok(TargetingReport {
        targets: x,
        baseline_objective: baseline,
        best_objective: r_star,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{path_network, Edge};

    #[test]
    fn matrix_rejects_shared_targets() {
        assert!(TargetMatrix::new(vec![vec![0, 1], vec![2]]).is_ok());
        assert!(TargetMatrix::new(vec![vec![0, 1], vec![1]]).is_err());
        assert!(TargetMatrix::new(vec![vec![3, 3]]).is_err());
    }

    #[test]
    fn budget_check() {
        let x = TargetMatrix::new(vec![vec![0, 1, 2]]).unwrap();
        assert!(x.check_budget(3).is_ok());
        assert!(x.check_budget(2).is_err());
    }

    #[test]
    fn consideration_set_examples() {
        let path = path_network(10, 1.0).unwrap();
        let all = consideration_set(&path, 10);
        assert_eq!(all, vec![1, 2, 3, 4, 5, 6, 7, 8, 0, 9]);
        assert_eq!(consideration_set(&path, 3), vec![1, 2, 3]);

        let edges = (1..5).map(|j| Edge { source: 0, target: j, rate: 1.0 }).collect();
        let star = Network::new(vec![0.5; 5], edges).unwrap();
        assert_eq!(consideration_set(&star, 1), vec![0]);
    }

    fn two_node() -> Network {
        // node 0 follows node 1
        Network::new(vec![0.0, 1.0], vec![Edge { source: 1, target: 0, rate: 10.0 }]).unwrap()
    }

    #[test]
    fn two_node_selects_follower() {
        let cfg = TargetingConfig {
            d_max: 1,
            consideration_size: 2,
            horizon: 30,
            ..TargetingConfig::default()
        };
        let rep = greedy_targets_with_report(
            &two_node(),
            ObjectiveKind::MaximizeMean,
            1,
            &cfg,
            &ModelParams::default(),
            &PolicyParams::default(),
        )
        .unwrap();
        assert_eq!(rep.targets.rows(), &[vec![0]]);
        assert!(rep.best_objective > rep.baseline_objective);
    }

    #[test]
    fn rejects_empty_inputs() {
        let cfg = TargetingConfig::default();
        let m = ModelParams::default();
        let p = PolicyParams::default();
        assert!(greedy_targets(&two_node(), ObjectiveKind::MaximizeMean, 0, &cfg, &m, &p).is_err());
        let bad = TargetingConfig { consideration_size: 0, ..cfg };
        assert!(greedy_targets(&two_node(), ObjectiveKind::MaximizeMean, 1, &bad, &m, &p).is_err());
    }

    #[test]
    fn path_min_var_disjoint_and_within_budget() {
        let net = path_network(10, 1.0).unwrap();
        let cfg = TargetingConfig {
            d_max: 2,
            consideration_size: 10,
            horizon: 30,
            ..TargetingConfig::default()
        };
        let x = greedy_targets(&net, ObjectiveKind::MinimizeVariance, 3, &cfg, &ModelParams::default(), &PolicyParams::default())
            .unwrap();
        assert!(x.check_budget(2).is_ok());
        assert!(TargetMatrix::new(x.rows().to_vec()).is_ok());
        assert_eq!(x.target_count(), 6);
    }
}
