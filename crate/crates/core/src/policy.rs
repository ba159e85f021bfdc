//! Agent content policies.
//!
//! The nudging policy picks, once per unit of time, the opinion that
//! maximizes the instantaneous objective gain over the agent's targets,
//!
//! ```text
//! g(u) = Σ_i w_i f(u − θ_i),   w_i = ∂r/∂θ_i
//! ```
//!
//! restricted to a box of half-width γ around its previous opinion. `g` is
//! piecewise linear with breakpoints at `θ_i − ε`, `θ_i`, `θ_i + ε`, so the
//! maximum is found by enumerating those points.
//!
//! The DeGroot baseline holds a constant extreme opinion chosen by objective.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::{shift, ContentPolicy, ModelParams};
use crate::error::{Error, Result};
use crate::objectives::ObjectiveKind;
use crate::targeting::TargetMatrix;

/// Distance used to realise one-sided limits of `g` at window edges that are
/// approached but not attained (the side of the jump where the term vanishes).
const ONE_SIDED_OFFSET: f64 = 1e-9;

/// Relative tolerance for treating two candidate scores as tied.
const TIE_TOLERANCE: f64 = 1e-12;

pub const DEFAULT_GAMMA: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    /// Largest change of an agent opinion between consecutive updates.
    pub gamma: f64,
}

impl Default for PolicyParams {
    fn default() -> Self {
        PolicyParams { gamma: DEFAULT_GAMMA }
    }
}

impl PolicyParams {
    pub fn validate(&self) -> Result<()> {
        if self.gamma > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("gamma must be > 0 (got {})", self.gamma)))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyFamily {
    Nudging,
    Degroot,
}

impl PolicyFamily {
    pub fn name(self) -> &'static str {
        match self {
            PolicyFamily::Nudging => "nudging",
            PolicyFamily::Degroot => "degroot",
        }
    }
}

impl fmt::Display for PolicyFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nudging" => Ok(PolicyFamily::Nudging),
            "degroot" => Ok(PolicyFamily::Degroot),
            other => Err(Error::InvalidParameter(format!(
                "unknown policy family {other:?} (expected nudging or degroot)"
            ))),
        }
    }
}

/// An exogenous influencer with a fixed target set.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub id: usize,
    pub rate: f64,
    pub targets: Vec<usize>,
    pub prev_opinion: Option<f64>,
}

impl Agent {
    pub fn from_targets(targets: &TargetMatrix, model: &ModelParams) -> Vec<Agent> {
        targets
            .rows()
            .iter()
            .enumerate()
            .map(|(id, row)| Agent {
                id,
                rate: model.lambda_max,
                targets: row.clone(),
                prev_opinion: None,
            })
            .collect()
    }
}

/// `g(u) = Σ w_i f(u − θ_i)`.
pub fn content_gain(u: f64, weights: &[f64], target_thetas: &[f64], model: &ModelParams) -> f64 {
    weights
        .iter()
        .zip(target_thetas)
        .map(|(w, th)| w * shift(u - th, model))
        .sum()
}

/// The interval an agent may choose from given its previous opinion.
pub fn feasible_interval(prev_u: Option<f64>, params: &PolicyParams, model: &ModelParams) -> (f64, f64) {
    match prev_u {
        None => (model.u_min, model.u_max),
        Some(p) => {
            let lo = (p - params.gamma).max(model.u_min);
            let hi = (p + params.gamma).min(model.u_max);
            if lo <= hi {
                (lo, hi)
            } else {
                // previous opinion outside the bounds; fall back to the nearest bound
                let b = p.clamp(model.u_min, model.u_max);
                (b, b)
            }
        }
    }
}

/// One greedy update: an argmax of `g` over the feasible interval.
///
/// Among maximizers the opinion closest to the mean of the target opinions
/// wins, then the smallest. An agent whose windows are all out of reach thus
/// walks toward its audience at speed γ instead of freezing.
pub fn greedy_content_step(
    weights: &[f64],
    target_thetas: &[f64],
    prev_u: Option<f64>,
    params: &PolicyParams,
    model: &ModelParams,
) -> Result<f64> {
    if target_thetas.is_empty() {
        return Err(Error::InvalidParameter("content step needs at least one target".into()));
    }
    if weights.len() != target_thetas.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} targets",
            weights.len(),
            target_thetas.len()
        )));
    }
    let (lo, hi) = feasible_interval(prev_u, params, model);
    let audience = target_thetas.iter().sum::<f64>() / target_thetas.len() as f64;

    let mut candidates = Vec::with_capacity(9 * target_thetas.len() + 3);
    candidates.extend([lo, hi, audience.clamp(lo, hi)]);
    for &th in target_thetas {
        for b in [th - model.epsilon, th, th + model.epsilon] {
            if !b.is_finite() {
                continue;
            }
            for x in [b, b - ONE_SIDED_OFFSET, b + ONE_SIDED_OFFSET] {
                if x >= lo && x <= hi {
                    candidates.push(x);
                }
            }
        }
    }

    let scored: Vec<(f64, f64)> = candidates
        .into_iter()
        .map(|u| (u, content_gain(u, weights, target_thetas, model)))
        .collect();
    let best = scored.iter().map(|&(_, g)| g).fold(f64::NEG_INFINITY, f64::max);
    let scale = weights.iter().map(|w| w.abs()).sum::<f64>()
        * model.omega
        * model.epsilon.min(model.u_max - model.u_min);
    let tol = TIE_TOLERANCE * scale;

    let (u, _) = scored
        .into_iter()
        .filter(|&(_, g)| g >= best - tol)
        .min_by(|a, b| {
            let da = (a.0 - audience).abs();
            let db = (b.0 - audience).abs();
            da.total_cmp(&db).then(a.0.total_cmp(&b.0))
        })
        .expect("interval endpoints are always candidates");
    Ok(u)
}

/// First opinion of an agent: an unconstrained greedy step.
pub fn initial_opinion(
    agent: &mut Agent,
    weights: &[f64],
    target_thetas: &[f64],
    model: &ModelParams,
) -> Result<f64> {
    if target_thetas.is_empty() {
        return Err(Error::EmptyTargets { agent: agent.id });
    }
    // γ is irrelevant without a previous opinion
    let u = greedy_content_step(weights, target_thetas, None, &PolicyParams::default(), model)?;
    agent.prev_opinion = Some(u);
    Ok(u)
}

/// Constant opinion held by the DeGroot baseline agent.
pub fn degroot_static_opinion(kind: ObjectiveKind) -> f64 {
    match kind {
        ObjectiveKind::MaximizeMean => 1.0,
        ObjectiveKind::MaximizeVariance => 0.0,
        ObjectiveKind::MinimizeVariance => 0.5,
    }
}

/// Greedy nudging policy for all agents, updated simultaneously.
#[derive(Debug, Clone)]
pub struct NudgingPolicy {
    kind: ObjectiveKind,
    params: PolicyParams,
    agents: Vec<Agent>,
}

impl NudgingPolicy {
    pub fn new(kind: ObjectiveKind, params: PolicyParams, targets: &TargetMatrix, model: &ModelParams) -> Self {
        NudgingPolicy {
            kind,
            params,
            agents: Agent::from_targets(targets, model),
        }
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }
}

impl ContentPolicy for NudgingPolicy {
    fn agent_opinions(
        &mut self,
        _t: usize,
        theta: &[f64],
        targets: &TargetMatrix,
        model: &ModelParams,
    ) -> Result<Vec<Option<f64>>> {
        if targets.agent_count() != self.agents.len() {
            return Err(Error::DimensionMismatch(format!(
                "policy built for {} agents, called with {}",
                self.agents.len(),
                targets.agent_count()
            )));
        }
        if targets.rows().iter().all(|r| r.is_empty()) {
            return Ok(vec![None; self.agents.len()]);
        }
        let grad = self.kind.gradient(theta)?;
        let mut out = Vec::with_capacity(self.agents.len());
        for (agent, row) in self.agents.iter_mut().zip(targets.rows()) {
            if row.is_empty() {
                out.push(None);
                continue;
            }
            let w: Vec<f64> = row.iter().map(|&i| grad[i]).collect();
            let th: Vec<f64> = row.iter().map(|&i| theta[i]).collect();
            let u = match agent.prev_opinion {
                None => initial_opinion(agent, &w, &th, model)?,
                Some(prev) => greedy_content_step(&w, &th, Some(prev), &self.params, model)?,
            };
            agent.prev_opinion = Some(u);
            out.push(Some(u));
        }
        Ok(out)
    }
}

/// Every agent with targets holds the same constant opinion.
#[derive(Debug, Clone, Copy)]
pub struct StaticPolicy {
    pub opinion: f64,
}

impl StaticPolicy {
    pub fn degroot(kind: ObjectiveKind) -> Self {
        StaticPolicy {
            opinion: degroot_static_opinion(kind),
        }
    }
}

impl ContentPolicy for StaticPolicy {
    fn agent_opinions(
        &mut self,
        _t: usize,
        _theta: &[f64],
        targets: &TargetMatrix,
        _model: &ModelParams,
    ) -> Result<Vec<Option<f64>>> {
        Ok(targets
            .rows()
            .iter()
            .map(|r| if r.is_empty() { None } else { Some(self.opinion) })
            .collect())
    }
}

/// Fresh content policy of the given family.
pub fn make_policy(
    family: PolicyFamily,
    kind: ObjectiveKind,
    params: PolicyParams,
    targets: &TargetMatrix,
    model: &ModelParams,
) -> Box<dyn ContentPolicy> {
    match family {
        PolicyFamily::Nudging => Box::new(NudgingPolicy::new(kind, params, targets, model)),
        PolicyFamily::Degroot => Box::new(StaticPolicy::degroot(kind)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> ModelParams {
        ModelParams {
            epsilon: 0.1,
            omega: 0.003,
            u_min: 0.0,
            u_max: 1.0,
            lambda_max: 10.0,
        }
    }

    fn params(gamma: f64) -> PolicyParams {
        PolicyParams { gamma }
    }

    #[test]
    fn single_target_positive_weight_sits_at_upper_edge() {
        let u = greedy_content_step(&[1.0], &[0.5], None, &params(0.001), &model()).unwrap();
        assert_eq!(u, 0.5 + 0.1);
    }

    #[test]
    fn single_target_negative_weight_sits_at_lower_edge() {
        let u = greedy_content_step(&[-1.0], &[0.5], None, &params(0.001), &model()).unwrap();
        assert_eq!(u, 0.5 - 0.1);
    }

    #[test]
    fn gamma_box_binds() {
        let u = greedy_content_step(&[1.0], &[0.5], Some(0.55), &params(0.001), &model()).unwrap();
        assert!((u - 0.551).abs() < 1e-15);
    }

    #[test]
    fn disjoint_windows_tie_breaks_to_audience_mean() {
        let u = greedy_content_step(&[1.0, 1.0], &[0.2, 0.8], None, &params(0.001), &model()).unwrap();
        assert!((u - 0.3).abs() < 1e-15, "{u}");
    }

    #[test]
    fn upper_bound_clips_the_nudge() {
        let u = greedy_content_step(&[1.0], &[0.95], None, &params(0.001), &model()).unwrap();
        assert_eq!(u, 1.0);
    }

    #[test]
    fn stranded_agent_walks_toward_audience() {
        // window of the target is 0.3 away; every reachable opinion scores 0
        let u = greedy_content_step(&[1.0], &[0.2], Some(0.6), &params(0.01), &model()).unwrap();
        assert!((u - 0.59).abs() < 1e-15);
    }

    #[test]
    fn empty_targets_rejected() {
        assert!(greedy_content_step(&[], &[], None, &params(0.1), &model()).is_err());
        let mut a = Agent { id: 3, rate: 1.0, targets: vec![], prev_opinion: None };
        assert!(matches!(initial_opinion(&mut a, &[], &[], &model()), Err(Error::EmptyTargets { agent: 3 })));
    }

    #[test]
    fn initial_opinion_examples() {
        let mut a = Agent { id: 0, rate: 10.0, targets: vec![0], prev_opinion: None };
        assert_eq!(initial_opinion(&mut a, &[0.5], &[0.0], &model()).unwrap(), 0.1);
        assert_eq!(a.prev_opinion, Some(0.1));
    }

    #[test]
    fn degroot_opinions() {
        assert_eq!(degroot_static_opinion(ObjectiveKind::MaximizeMean), 1.0);
        assert_eq!(degroot_static_opinion(ObjectiveKind::MaximizeVariance), 0.0);
        assert_eq!(degroot_static_opinion(ObjectiveKind::MinimizeVariance), 0.5);
    }

    #[test]
    fn family_names() {
        assert_eq!("nudging".parse::<PolicyFamily>().unwrap(), PolicyFamily::Nudging);
        assert_eq!("degroot".parse::<PolicyFamily>().unwrap(), PolicyFamily::Degroot);
        assert!("stubborn".parse::<PolicyFamily>().is_err());
    }
}
