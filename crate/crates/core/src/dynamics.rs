//! Bounded-confidence opinion dynamics with exogenous agents.
//!
//! Node `i` drifts as
//!
//! ```text
//! dθ_i/dt = Σ_j λ_ji f(θ_j − θ_i) + λ_max Σ_a x_ai f(u_a − θ_i)
//! f(x)    = ω x  if |x| ≤ ε,  0 otherwise
//! ```
//!
//! Agents refresh their opinions once per unit of time from the current state
//! and hold them fixed while node opinions advance with classical RK4.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Network;
use crate::targeting::TargetMatrix;

/// Floating-point slack on the confidence window. Opinions constructed as
/// `θ ± ε` must evaluate as inside the window of `θ`.
pub const WINDOW_SLACK: f64 = 1e-12;

pub const DEFAULT_SUBSTEP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Confidence interval ε; `f64::INFINITY` gives linear DeGroot dynamics.
    pub epsilon: f64,
    /// Persuasion strength ω.
    pub omega: f64,
    pub u_min: f64,
    pub u_max: f64,
    /// Posting rate of every agent.
    pub lambda_max: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            epsilon: 0.1,
            omega: 0.003,
            u_min: 0.0,
            u_max: 1.0,
            lambda_max: 10.0,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.epsilon > 0.0) {
            bad.push(format!("epsilon must be > 0 (got {})", self.epsilon));
        }
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            bad.push(format!("omega must be > 0 (got {})", self.omega));
        }
        if !(self.u_min < self.u_max) || !self.u_min.is_finite() || !self.u_max.is_finite() {
            bad.push(format!(
                "u_min must be < u_max (got {} and {})",
                self.u_min, self.u_max
            ));
        }
        if !(self.lambda_max >= 0.0) || !self.lambda_max.is_finite() {
            bad.push(format!("lambda_max must be >= 0 (got {})", self.lambda_max));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(bad.join("; ")))
        }
    }

    /// The same parameters with an unbounded confidence interval.
    pub fn linear(&self) -> Self {
        ModelParams {
            epsilon: f64::INFINITY,
            ..*self
        }
    }

    #[inline]
    pub fn shift(&self, x: f64) -> f64 {
        shift(x, self)
    }
}

/// The bounded-confidence shift `f(x)`; the window edge `|x| = ε` is inclusive.
#[inline]
pub fn shift(x: f64, params: &ModelParams) -> f64 {
    if x.abs() - params.epsilon <= WINDOW_SLACK {
        params.omega * x
    } else {
        0.0
    }
}

/// Time-indexed opinions of every node and every agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// `0, 1, ..., T`.
    pub times: Vec<f64>,
    /// `node_opinions[t][i]` is θ_i(t), for `t` in `0..=T`.
    pub node_opinions: Vec<Vec<f64>>,
    /// `agent_opinions[t][a]` is the opinion agent `a` holds on `[t, t+1)`,
    /// for `t` in `0..T`; `None` for agents without targets.
    pub agent_opinions: Vec<Vec<Option<f64>>>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.times.len().saturating_sub(1)
    }

    pub fn initial_opinions(&self) -> &[f64] {
        &self.node_opinions[0]
    }

    pub fn final_opinions(&self) -> &[f64] {
        self.node_opinions.last().expect("trajectory has at least one row")
    }

    /// Opinion path of a single agent.
    pub fn agent_path(&self, agent: usize) -> Vec<Option<f64>> {
        self.agent_opinions.iter().map(|row| row[agent]).collect()
    }
}

/// Supplies agent opinions once per unit of time.
pub trait ContentPolicy {
    /// Opinions held by each agent on `[t, t+1)` given the opinions `theta`
    /// at time `t`. Agents without targets may return `None`.
    fn agent_opinions(
        &mut self,
        t: usize,
        theta: &[f64],
        targets: &TargetMatrix,
        params: &ModelParams,
    ) -> Result<Vec<Option<f64>>>;
}

impl<F> ContentPolicy for F
where
    F: FnMut(usize, &[f64], &TargetMatrix, &ModelParams) -> Result<Vec<Option<f64>>>,
{
    fn agent_opinions(
        &mut self,
        t: usize,
        theta: &[f64],
        targets: &TargetMatrix,
        params: &ModelParams,
    ) -> Result<Vec<Option<f64>>> {
        self(t, theta, targets, params)
    }
}

/// `dθ/dt` for every node. `u[a]` is ignored for agents with no targets.
pub fn drift(
    network: &Network,
    theta: &[f64],
    targets: &TargetMatrix,
    u: &[Option<f64>],
    params: &ModelParams,
) -> Result<Vec<f64>> {
    check_dims(network, theta, targets)?;
    if u.len() != targets.agent_count() {
        return Err(Error::DimensionMismatch(format!(
            "{} agent opinions for {} agents",
            u.len(),
            targets.agent_count()
        )));
    }
    let field = DriftField::new(network, targets, params);
    let mut out = vec![0.0; theta.len()];
    field.eval(theta, u, &mut out);
    Ok(out)
}

fn check_dims(network: &Network, theta: &[f64], targets: &TargetMatrix) -> Result<()> {
    if theta.len() != network.node_count() {
        return Err(Error::DimensionMismatch(format!(
            "{} opinions for {} nodes",
            theta.len(),
            network.node_count()
        )));
    }
    if let Some(bad) = targets.rows().iter().flatten().find(|&&i| i >= network.node_count()) {
        return Err(Error::DimensionMismatch(format!(
            "target {bad} is not a node of a {}-node network",
            network.node_count()
        )));
    }
    Ok(())
}

/// Drift evaluator with the agent→node incidence precomputed. Summation order
/// per node is fixed: incoming edges in edge order, then agents by id.
struct DriftField<'a> {
    network: &'a Network,
    params: &'a ModelParams,
    agents_of: Vec<Vec<usize>>,
}

impl<'a> DriftField<'a> {
    fn new(network: &'a Network, targets: &TargetMatrix, params: &'a ModelParams) -> Self {
        let mut agents_of = vec![Vec::new(); network.node_count()];
        for (a, row) in targets.rows().iter().enumerate() {
            for &i in row {
                agents_of[i].push(a);
            }
        }
        DriftField {
            network,
            params,
            agents_of,
        }
    }

    fn eval(&self, theta: &[f64], u: &[Option<f64>], out: &mut [f64]) {
        for (i, slot) in out.iter_mut().enumerate() {
            let th = theta[i];
            let mut acc = 0.0;
            for e in self.network.in_edges(i) {
                acc += e.rate * shift(theta[e.source] - th, self.params);
            }
            let mut agent_acc = 0.0;
            for &a in &self.agents_of[i] {
                if let Some(ua) = u[a] {
                    agent_acc += shift(ua - th, self.params);
                }
            }
            *slot = acc + self.params.lambda_max * agent_acc;
        }
    }
}

/// Classic RK4 over one unit of time with scratch buffers kept between calls.
struct Rk4 {
    n_sub: usize,
    k: [Vec<f64>; 4],
    scratch: Vec<f64>,
}

impl Rk4 {
    fn new(n: usize, n_sub: usize) -> Self {
        Rk4 {
            n_sub,
            k: [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            scratch: vec![0.0; n],
        }
    }

    fn advance(&mut self, field: &DriftField<'_>, theta: &mut [f64], u: &[Option<f64>]) {
        let h = 1.0 / self.n_sub as f64;
        let n = theta.len();
        let [k1, k2, k3, k4] = &mut self.k;
        let scratch = &mut self.scratch;
        for _ in 0..self.n_sub {
            field.eval(theta, u, k1);
            for i in 0..n {
                scratch[i] = theta[i] + 0.5 * h * k1[i];
            }
            field.eval(scratch, u, k2);
            for i in 0..n {
                scratch[i] = theta[i] + 0.5 * h * k2[i];
            }
            field.eval(scratch, u, k3);
            for i in 0..n {
                scratch[i] = theta[i] + h * k3[i];
            }
            field.eval(scratch, u, k4);
            for i in 0..n {
                theta[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
    }
}

/// Advances `theta` by one unit of time with agent opinions `u` held fixed.
pub fn advance(
    network: &Network,
    theta: &mut [f64],
    targets: &TargetMatrix,
    u: &[Option<f64>],
    substep: f64,
    params: &ModelParams,
) -> Result<()> {
    check_dims(network, theta, targets)?;
    if u.len() != targets.agent_count() {
        return Err(Error::DimensionMismatch(format!(
            "{} opinions for {} agents",
            u.len(),
            targets.agent_count()
        )));
    }
    let field = DriftField::new(network, targets, params);
    Rk4::new(theta.len(), substeps_per_unit(substep)?).advance(&field, theta, u);
    Ok(())
}

/// Number of RK4 substeps per unit of time for step size `h`.
pub fn substeps_per_unit(h: f64) -> Result<usize> {
    if !(h > 0.0 && h <= 1.0) {
        return Err(Error::InvalidParameter(format!("substep must be in (0, 1], got {h}")));
    }
    let steps = (1.0 / h).round();
    if (steps * h - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "substep {h} does not divide the unit interval evenly"
        )));
    }
    Ok(steps as usize)
}

/// Called with `t`, θ(t) and, except at `t = T`, the agent opinions on `[t, t+1)`.
type Observer<'a> = dyn FnMut(usize, &[f64], Option<&[Option<f64>]>) + 'a;

/// Runs the unit-time update loop and hands every state to `observe`.
/// Returns the final opinions.
fn run(
    network: &Network,
    targets: &TargetMatrix,
    policy: &mut dyn ContentPolicy,
    horizon: usize,
    substep: f64,
    params: &ModelParams,
    observe: &mut Observer,
) -> Result<Vec<f64>> {
    params.validate()?;
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    let n_sub = substeps_per_unit(substep)?;
    let theta0 = network.initial_opinions();
    check_dims(network, theta0, targets)?;

    let field = DriftField::new(network, targets, params);
    let mut stepper = Rk4::new(network.node_count(), n_sub);
    let mut theta = theta0.to_vec();

    for t in 0..horizon {
        let u = policy.agent_opinions(t, &theta, targets, params)?;
        if u.len() != targets.agent_count() {
            return Err(Error::DimensionMismatch(format!(
                "policy returned {} opinions for {} agents",
                u.len(),
                targets.agent_count()
            )));
        }
        for (a, ua) in u.iter().enumerate() {
            if let Some(v) = *ua {
                if !(v >= params.u_min && v <= params.u_max) {
                    return Err(Error::PolicyOutOfBounds {
                        agent: a,
                        opinion: v,
                        lo: params.u_min,
                        hi: params.u_max,
                    });
                }
            }
        }
        observe(t, &theta, Some(&u));

        stepper.advance(&field, &mut theta, &u);
    }
    observe(horizon, &theta, None);
    Ok(theta)
}

/// Simulates `horizon` units of time and records the full path.
pub fn integrate(
    network: &Network,
    targets: &TargetMatrix,
    policy: &mut dyn ContentPolicy,
    horizon: usize,
    substep: f64,
    params: &ModelParams,
) -> Result<Trajectory> {
    let mut traj = Trajectory {
        times: Vec::with_capacity(horizon + 1),
        node_opinions: Vec::with_capacity(horizon + 1),
        agent_opinions: Vec::with_capacity(horizon),
    };
    run(network, targets, policy, horizon, substep, params, &mut |t, theta, u| {
        traj.times.push(t as f64);
        traj.node_opinions.push(theta.to_vec());
        if let Some(u) = u {
            traj.agent_opinions.push(u.to_vec());
        }
    })?;
    Ok(traj)
}

/// Like [`integrate`] but keeps only θ(T).
pub fn final_opinions(
    network: &Network,
    targets: &TargetMatrix,
    policy: &mut dyn ContentPolicy,
    horizon: usize,
    substep: f64,
    params: &ModelParams,
) -> Result<Vec<f64>> {
    run(network, targets, policy, horizon, substep, params, &mut |_, _, _| {})
}

/// Content policy with no agents posting.
pub fn silent(
    _t: usize,
    _theta: &[f64],
    targets: &TargetMatrix,
    _p: &ModelParams,
) -> Result<Vec<Option<f64>>> {
    Ok(vec![None; targets.agent_count()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{path_network, Edge};

    fn p(eps: f64, omega: f64) -> ModelParams {
        ModelParams {
            epsilon: eps,
            omega,
            ..ModelParams::default()
        }
    }

    #[test]
    fn shift_examples() {
        let m = p(0.1, 0.003);
        assert_eq!(shift(0.0, &m), 0.0);
        assert!((shift(0.05, &m) - 0.00015).abs() < 1e-18);
        assert_eq!(shift(0.11, &m), 0.0);
        assert!((shift(-0.1, &m) + 0.0003).abs() < 1e-18);
        assert_eq!(shift(5.0, &m.linear()), 0.015);
    }

    #[test]
    fn window_edge_survives_rounding() {
        let m = p(0.1, 0.003);
        for k in 0..1000 {
            let theta = k as f64 / 1000.0;
            assert!(shift((theta + 0.1) - theta, &m) > 0.0, "theta = {theta}");
            assert!(shift((theta - 0.1) - theta, &m) < 0.0, "theta = {theta}");
        }
    }

    #[test]
    fn drift_two_node_direct_evaluation() {
        let net = Network::new(
            vec![0.91, 0.89],
            vec![
                Edge { source: 0, target: 1, rate: 100.0 },
                Edge { source: 1, target: 0, rate: 1.0 },
            ],
        )
        .unwrap();
        let d = drift(&net, &[0.91, 0.89], &TargetMatrix::empty(0), &[], &p(0.1, 0.003)).unwrap();
        assert!((d[1] - 0.006).abs() < 1e-15);
        assert!((d[0] + 0.00006).abs() < 1e-17);
    }

    #[test]
    fn drift_agent_at_target_opinion_is_zero() {
        let net = Network::new(vec![0.4], vec![]).unwrap();
        let x = TargetMatrix::new(vec![vec![0]]).unwrap();
        let d = drift(&net, &[0.4], &x, &[Some(0.4)], &ModelParams::default()).unwrap();
        assert_eq!(d, vec![0.0]);
    }

    #[test]
    fn drift_closed_windows() {
        let net = Network::new(
            vec![0.0, 0.5, 1.0],
            vec![Edge { source: 0, target: 1, rate: 3.0 }, Edge { source: 2, target: 1, rate: 3.0 }],
        )
        .unwrap();
        let d = drift(&net, &[0.0, 0.5, 1.0], &TargetMatrix::empty(0), &[], &p(0.1, 0.003)).unwrap();
        assert_eq!(d, vec![0.0; 3]);
    }

    #[test]
    fn drift_dimension_mismatch() {
        let net = path_network(3, 1.0).unwrap();
        assert!(drift(&net, &[0.0, 1.0], &TargetMatrix::empty(0), &[], &ModelParams::default()).is_err());
        let x = TargetMatrix::new(vec![vec![5]]).unwrap();
        assert!(drift(&net, &[0.0, 0.5, 1.0], &x, &[Some(0.1)], &ModelParams::default()).is_err());
    }

    #[test]
    fn drift_is_linear_in_edge_rate() {
        let theta = [0.3, 0.35, 0.42];
        let mk = |r: f64| {
            Network::new(
                theta.to_vec(),
                vec![Edge { source: 0, target: 1, rate: r }, Edge { source: 2, target: 1, rate: 2.0 }],
            )
            .unwrap()
        };
        let m = ModelParams::default();
        let none = TargetMatrix::empty(0);
        let base = drift(&mk(0.0), &theta, &none, &[], &m).unwrap()[1];
        let one = drift(&mk(1.5), &theta, &none, &[], &m).unwrap()[1] - base;
        let two = drift(&mk(3.0), &theta, &none, &[], &m).unwrap()[1] - base;
        assert!((two - 2.0 * one).abs() < 1e-18);
    }

    #[test]
    fn frozen_dynamics_stay_constant() {
        let net = path_network(5, 1.0).unwrap(); // gaps 0.25 > ε
        let traj = integrate(&net, &TargetMatrix::empty(0), &mut silent, 20, 0.1, &ModelParams::default()).unwrap();
        assert_eq!(traj.node_opinions.len(), 21);
        for row in &traj.node_opinions {
            assert_eq!(row.as_slice(), net.initial_opinions());
        }
    }

    #[test]
    fn out_of_bounds_policy_is_rejected() {
        let net = path_network(2, 1.0).unwrap();
        let x = TargetMatrix::new(vec![vec![0]]).unwrap();
        let mut bad = |_: usize, _: &[f64], _: &TargetMatrix, _: &ModelParams| Ok(vec![Some(1.5)]);
        let err = integrate(&net, &x, &mut bad, 3, 0.1, &ModelParams::default()).unwrap_err();
        assert!(matches!(err, Error::PolicyOutOfBounds { .. }));
    }

    #[test]
    fn substep_must_divide_unit() {
        assert_eq!(substeps_per_unit(0.1).unwrap(), 10);
        assert_eq!(substeps_per_unit(1.0).unwrap(), 1);
        assert!(substeps_per_unit(0.3).is_err());
        assert!(substeps_per_unit(0.0).is_err());
        assert!(substeps_per_unit(1.5).is_err());
    }

    #[test]
    fn degroot_limit_consensus_gap_shrinks() {
        let net = Network::new(
            vec![0.0, 1.0],
            vec![Edge { source: 0, target: 1, rate: 2.0 }, Edge { source: 1, target: 0, rate: 1.0 }],
        )
        .unwrap();
        let m = ModelParams::default().linear();
        let traj = integrate(&net, &TargetMatrix::empty(0), &mut silent, 30, 0.1, &m).unwrap();
        let gaps: Vec<f64> = traj.node_opinions.iter().map(|r| (r[0] - r[1]).abs()).collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]));
    }
}
