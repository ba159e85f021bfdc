//! Config-driven experiments: baseline vs. policy runs and their exports.
//!
//! Config keys (TOML):
//!
//! ```toml
//! seed = 0
//! out_dir = "out"
//! objective = "max_mean"          # max_mean | max_var | min_var
//!
//! [network]
//! edges = "edges.csv"             # or: generator = "path", nodes = 10, rate = 1.0
//! opinions = "opinions.csv"
//! # rates = "rates.csv"           # per-node posting rates; edges then list follows only
//! # sample = 1000                 # induced subgraph of this many nodes, drawn with `seed`
//!
//! [model]
//! epsilon = 0.1
//! omega = 0.003
//! lambda_max = 10.0
//!
//! [policy]
//! family = "nudging"              # nudging | degroot
//! gamma = 0.001
//!
//! [agents]
//! count = 1
//! d_max = 100
//!
//! [targeting]
//! consideration_size = 1000
//! horizon = 30                    # defaults to 365 for the degroot family
//!
//! [eval]
//! horizon = 365
//!
//! [integrator]
//! substep = 0.1
//! ```
//!
//! Relative paths are resolved against the config file's directory.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate, silent, ModelParams, Trajectory, DEFAULT_SUBSTEP};
use crate::error::{Error, Result};
use crate::network::{load_network_per_node_rates, load_network_with_report, path_network, Network};
use crate::objectives::{mean, ObjectiveKind};
use crate::policy::{make_policy, PolicyFamily, PolicyParams};
use crate::targeting::{greedy_targets_with_report, TargetMatrix, TargetingConfig};

pub const DEFAULT_BINS: usize = 50;
/// Trajectory exports carry one column per node up to this size.
pub const NODE_COLUMN_LIMIT: usize = 100;

// ---------------------------------------------------------------------------
// raw config, every field optional so CLI flags can fill or override it

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub objective: Option<String>,
    #[serde(default)]
    pub network: RawNetwork,
    #[serde(default)]
    pub model: RawModel,
    #[serde(default)]
    pub policy: RawPolicy,
    #[serde(default)]
    pub agents: RawAgents,
    #[serde(default)]
    pub targeting: RawTargeting,
    #[serde(default)]
    pub eval: RawEval,
    #[serde(default)]
    pub integrator: RawIntegrator,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawNetwork {
    pub edges: Option<PathBuf>,
    pub opinions: Option<PathBuf>,
    pub rates: Option<PathBuf>,
    pub generator: Option<String>,
    pub nodes: Option<usize>,
    pub rate: Option<f64>,
    pub sample: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawModel {
    pub epsilon: Option<f64>,
    pub omega: Option<f64>,
    pub lambda_max: Option<f64>,
    pub u_min: Option<f64>,
    pub u_max: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPolicy {
    pub family: Option<String>,
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawAgents {
    pub count: Option<usize>,
    pub d_max: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawTargeting {
    pub consideration_size: Option<usize>,
    pub horizon: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawEval {
    pub horizon: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawIntegrator {
    pub substep: Option<f64>,
}

impl RawConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))
    }

    /// Reads a config file and resolves its relative paths against the file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut raw = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        for p in [
            &mut raw.network.edges,
            &mut raw.network.opinions,
            &mut raw.network.rates,
            &mut raw.out_dir,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(raw)
    }

    /// Checks every field and reports all problems at once.
    pub fn resolve(&self) -> Result<CampaignConfig> {
        let mut bad = Vec::new();

        let objective = match self.objective.as_deref().unwrap_or("max_mean").parse::<ObjectiveKind>() {
            Ok(k) => k,
            Err(e) => {
                bad.push(format!("objective: {e}"));
                ObjectiveKind::MaximizeMean
            }
        };
        let family = match self.policy.family.as_deref().unwrap_or("nudging").parse::<PolicyFamily>() {
            Ok(f) => f,
            Err(e) => {
                bad.push(format!("policy.family: {e}"));
                PolicyFamily::Nudging
            }
        };

        let d = ModelParams::default();
        let model = ModelParams {
            epsilon: self.model.epsilon.unwrap_or(d.epsilon),
            omega: self.model.omega.unwrap_or(d.omega),
            lambda_max: self.model.lambda_max.unwrap_or(d.lambda_max),
            u_min: self.model.u_min.unwrap_or(d.u_min),
            u_max: self.model.u_max.unwrap_or(d.u_max),
        };
        if !(model.epsilon > 0.0) {
            bad.push(format!("model.epsilon must be > 0 (got {})", model.epsilon));
        }
        if !(model.omega >= 0.0 && model.omega.is_finite()) {
            bad.push(format!("model.omega must be finite and >= 0 (got {})", model.omega));
        }
        if !(model.lambda_max >= 0.0 && model.lambda_max.is_finite()) {
            bad.push(format!("model.lambda_max must be finite and >= 0 (got {})", model.lambda_max));
        }
        if !(model.u_min < model.u_max) {
            bad.push(format!("model.u_min must be below model.u_max (got {} and {})", model.u_min, model.u_max));
        }

        let policy = PolicyParams {
            gamma: self.policy.gamma.unwrap_or(PolicyParams::default().gamma),
        };
        if !(policy.gamma > 0.0) {
            bad.push(format!("policy.gamma must be > 0 (got {})", policy.gamma));
        }

        let agents = self.agents.count.unwrap_or(1);
        let d_max = self.agents.d_max.unwrap_or(100);
        if d_max < 1 {
            bad.push("agents.d_max must be at least 1".into());
        }
        let consideration_size = self.targeting.consideration_size.unwrap_or(1000);
        if consideration_size < 1 {
            bad.push("targeting.consideration_size must be at least 1".into());
        }
        let default_targeting = match family {
            PolicyFamily::Nudging => 30,
            PolicyFamily::Degroot => 365,
        };
        let targeting_horizon = self.targeting.horizon.unwrap_or(default_targeting);
        if targeting_horizon < 1 {
            bad.push("targeting.horizon must be at least 1".into());
        }
        let eval_horizon = self.eval.horizon.unwrap_or(365);
        if eval_horizon < 1 {
            bad.push("eval.horizon must be at least 1".into());
        }
        let substep = self.integrator.substep.unwrap_or(DEFAULT_SUBSTEP);
        if let Err(e) = crate::dynamics::substeps_per_unit(substep) {
            bad.push(format!("integrator.substep: {e}"));
        }

        let network = self.network_source(&mut bad);

        if !bad.is_empty() {
            return Err(Error::Config(bad));
        }
        Ok(CampaignConfig {
            network: network.expect("checked above"),
            sample: self.network.sample,
            model,
            policy,
            family,
            objective,
            agents,
            d_max,
            consideration_size,
            targeting_horizon,
            eval_horizon,
            substep,
            seed: self.seed.unwrap_or(0),
            out_dir: self.out_dir.clone().unwrap_or_else(|| PathBuf::from("out")),
        })
    }

    fn network_source(&self, bad: &mut Vec<String>) -> Option<NetworkSource> {
        let n = &self.network;
        if let Some(s) = n.sample {
            if s == 0 {
                bad.push("network.sample must be at least 1".into());
            }
        }
        match (&n.generator, &n.edges, &n.opinions) {
            (Some(g), None, None) => {
                if g != "path" {
                    bad.push(format!("network.generator: unknown generator {g:?} (expected path)"));
                    return None;
                }
                let nodes = n.nodes.unwrap_or(10);
                let rate = n.rate.unwrap_or(1.0);
                if nodes < 1 {
                    bad.push("network.nodes must be at least 1".into());
                }
                if !(rate >= 0.0 && rate.is_finite()) {
                    bad.push(format!("network.rate must be finite and >= 0 (got {rate})"));
                }
                Some(NetworkSource::Path { nodes, rate })
            }
            (None, Some(edges), Some(opinions)) => {
                for (key, p) in [("network.edges", Some(edges)), ("network.opinions", Some(opinions)), ("network.rates", n.rates.as_ref())] {
                    if let Some(p) = p {
                        if !p.is_file() {
                            bad.push(format!("{key}: file {} does not exist", p.display()));
                        }
                    }
                }
                Some(NetworkSource::Files {
                    edges: edges.clone(),
                    opinions: opinions.clone(),
                    rates: n.rates.clone(),
                })
            }
            (Some(_), _, _) => {
                bad.push("network: give either generator or edges/opinions, not both".into());
                None
            }
            (None, None, None) => {
                bad.push("network: missing edges/opinions files or generator".into());
                None
            }
            (None, e, o) => {
                if e.is_none() {
                    bad.push("network.edges is missing".into());
                }
                if o.is_none() {
                    bad.push("network.opinions is missing".into());
                }
                None
            }
        }
    }
}

// ---------------------------------------------------------------------------
// validated config

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum NetworkSource {
    Files {
        edges: PathBuf,
        opinions: PathBuf,
        rates: Option<PathBuf>,
    },
    Path {
        nodes: usize,
        rate: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignConfig {
    pub network: NetworkSource,
    pub sample: Option<usize>,
    pub model: ModelParams,
    pub policy: PolicyParams,
    pub family: PolicyFamily,
    pub objective: ObjectiveKind,
    pub agents: usize,
    pub d_max: usize,
    pub consideration_size: usize,
    pub targeting_horizon: usize,
    pub eval_horizon: usize,
    pub substep: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl CampaignConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        RawConfig::from_file(path)?.resolve()
    }

    /// Builds (or loads and optionally samples) the network.
    pub fn load_network(&self) -> Result<Network> {
        let net = match &self.network {
            NetworkSource::Path { nodes, rate } => path_network(*nodes, *rate)?,
            NetworkSource::Files { edges, opinions, rates } => {
                let loaded = match rates {
                    Some(rates) => load_network_per_node_rates(edges, rates, opinions)?,
                    None => load_network_with_report(edges, opinions)?,
                };
                for w in &loaded.warnings {
                    log::warn!("{w}");
                }
                loaded.network
            }
        };
        match self.sample {
            Some(k) if k < net.node_count() => Ok(net.sample_induced_subgraph(k, self.seed)?.network),
            _ => Ok(net),
        }
    }

    pub fn targeting(&self) -> TargetingConfig {
        TargetingConfig {
            d_max: self.d_max,
            consideration_size: self.consideration_size,
            horizon: self.targeting_horizon,
            family: self.family,
            substep: self.substep,
        }
    }
}

// ---------------------------------------------------------------------------
// deltas and densities

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveDelta {
    pub value: f64,
    /// `false` when the baseline is zero and `value` is an absolute difference.
    pub relative: bool,
}

/// Percent change relative to `|r_baseline|`.
pub fn objective_delta(r_policy: f64, r_baseline: f64) -> ObjectiveDelta {
    if r_baseline == 0.0 {
        ObjectiveDelta {
            value: r_policy - r_baseline,
            relative: false,
        }
    } else {
        ObjectiveDelta {
            value: 100.0 * (r_policy - r_baseline) / r_baseline.abs(),
            relative: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityBin {
    pub left: f64,
    pub right: f64,
    pub count: usize,
    pub density: f64,
}

/// Histogram over `[0, 1]`; the last bin is closed.
pub fn density_histogram(theta: &[f64], bins: usize) -> Result<Vec<DensityBin>> {
    if bins < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 bins, got {bins}")));
    }
    let width = 1.0 / bins as f64;
    let mut counts = vec![0usize; bins];
    for &t in theta {
        let k = ((t * bins as f64).floor() as isize).clamp(0, bins as isize - 1) as usize;
        counts[k] += 1;
    }
    let n = theta.len().max(1) as f64;
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| DensityBin {
            left: k as f64 * width,
            right: (k + 1) as f64 * width,
            count,
            density: count as f64 / (n * width),
        })
        .collect())
}

/// Writes the histogram to `path` and the raw opinions to `<stem>.values.csv`.
pub fn export_density(theta: &[f64], bins: usize, path: &Path) -> Result<PathBuf> {
    let hist = density_histogram(theta, bins)?;
    let mut w = csv_writer(path)?;
    w.write_record(["bin_left", "bin_right", "count", "density"])?;
    for b in &hist {
        w.write_record([b.left.to_string(), b.right.to_string(), b.count.to_string(), b.density.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;

    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("density");
    let raw = path.with_file_name(format!("{stem}.values.csv"));
    let mut w = csv_writer(&raw)?;
    w.write_record(["node", "opinion"])?;
    for (i, t) in theta.iter().enumerate() {
        w.write_record([i.to_string(), t.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(&raw, e))?;
    Ok(raw)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

// ---------------------------------------------------------------------------
// trajectory export

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Ndjson,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Ndjson => "ndjson",
        }
    }
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "ndjson" => Ok(OutputFormat::Ndjson),
            other => Err(Error::InvalidParameter(format!("unknown format {other:?} (expected csv or ndjson)"))),
        }
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

const QUANTILES: [(&str, f64); 5] = [("q05", 0.05), ("q25", 0.25), ("q50", 0.5), ("q75", 0.75), ("q95", 0.95)];

#[derive(Debug, Serialize)]
struct TrajectoryRow<'a> {
    t: f64,
    mean: f64,
    variance: f64,
    q05: f64,
    q25: f64,
    q50: f64,
    q75: f64,
    q95: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    nodes: Option<&'a [f64]>,
    agents: &'a [Option<f64>],
}

fn summary_stats(theta: &[f64]) -> (f64, f64, [f64; 5]) {
    let mut sorted = theta.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mu = mean(theta);
    let var = if theta.len() > 1 {
        theta.iter().map(|t| (t - mu) * (t - mu)).sum::<f64>() / (theta.len() - 1) as f64
    } else {
        0.0
    };
    let mut q = [0.0; 5];
    for (slot, (_, p)) in q.iter_mut().zip(QUANTILES) {
        *slot = quantile(&sorted, p);
    }
    (mu, var, q)
}

/// One row per time step: summary statistics, optional per-node opinions and
/// each agent's opinion on `[t, t+1)` (empty at `t = T`).
pub fn write_trajectory<W: Write>(traj: &Trajectory, format: OutputFormat, node_columns: bool, out: W) -> Result<()> {
    let n_agents = traj.agent_opinions.first().map_or(0, Vec::len);
    let no_agents = vec![None; n_agents];
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            let n = traj.node_opinions[0].len();
            let mut header: Vec<String> = ["t", "mean", "variance"].iter().map(|s| s.to_string()).collect();
            header.extend(QUANTILES.iter().map(|(name, _)| name.to_string()));
            if node_columns {
                header.extend((0..n).map(|i| format!("node_{i}")));
            }
            header.extend((0..n_agents).map(|a| format!("agent_{a}")));
            w.write_record(&header)?;
            for (k, theta) in traj.node_opinions.iter().enumerate() {
                let (mu, var, q) = summary_stats(theta);
                let mut rec = vec![traj.times[k].to_string(), mu.to_string(), var.to_string()];
                rec.extend(q.iter().map(f64::to_string));
                if node_columns {
                    rec.extend(theta.iter().map(f64::to_string));
                }
                let agents = traj.agent_opinions.get(k).unwrap_or(&no_agents);
                rec.extend(agents.iter().map(|u| u.map(|v| v.to_string()).unwrap_or_default()));
                w.write_record(&rec)?;
            }
            w.flush().map_err(|e| Error::io("<output>", e))?;
        }
        OutputFormat::Ndjson => {
            let mut w = out;
            for (k, theta) in traj.node_opinions.iter().enumerate() {
                let (mu, variance, q) = summary_stats(theta);
                let row = TrajectoryRow {
                    t: traj.times[k],
                    mean: mu,
                    variance,
                    q05: q[0],
                    q25: q[1],
                    q50: q[2],
                    q75: q[3],
                    q95: q[4],
                    nodes: node_columns.then_some(theta.as_slice()),
                    agents: traj.agent_opinions.get(k).unwrap_or(&no_agents),
                };
                serde_json::to_writer(&mut w, &row)?;
                w.write_all(b"\n").map_err(|e| Error::io("<trajectory>", e))?;
            }
            w.flush().map_err(|e| Error::io("<trajectory>", e))?;
        }
    }
    Ok(())
}

/// Agent opinion paths, one row per `(t, agent)` with targets.
pub fn write_policy_path<W: Write>(traj: &Trajectory, format: OutputFormat, out: W) -> Result<()> {
    #[derive(Serialize)]
    struct Row {
        t: usize,
        agent: usize,
        u: f64,
    }
    let rows = traj.agent_opinions.iter().enumerate().flat_map(|(t, us)| {
        us.iter()
            .enumerate()
            .filter_map(move |(agent, u)| u.map(|u| Row { t, agent, u }))
    });
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for r in rows {
                w.serialize(r)?;
            }
            w.flush().map_err(|e| Error::io("<output>", e))?;
        }
        OutputFormat::Ndjson => {
            let mut w = out;
            for r in rows {
                serde_json::to_writer(&mut w, &r)?;
                w.write_all(b"\n").map_err(|e| Error::io("<policy>", e))?;
            }
            w.flush().map_err(|e| Error::io("<policy>", e))?;
        }
    }
    Ok(())
}

/// `agent,node` rows, nodes written by label.
pub fn write_targets<W: Write>(targets: &TargetMatrix, network: &Network, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["agent", "node"])?;
    for (a, n) in targets.assignments() {
        w.write_record([a.to_string(), network.label(n).to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<output>", e))?;
    Ok(())
}

/// Reads an `agent,node` file; agents must be numbered `0..k` and nodes are labels.
pub fn read_targets(path: &Path, network: &Network) -> Result<TargetMatrix> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })?;
    let index: std::collections::HashMap<&str, usize> =
        network.labels().iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let mut rows: Vec<Vec<usize>> = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        if rec.len() != 2 {
            return Err(parse_err(format!("expected 2 fields, found {}", rec.len())));
        }
        let agent: usize = rec[0].parse().map_err(|_| parse_err(format!("bad agent id {:?}", &rec[0])))?;
        let node = *index
            .get(&rec[1])
            .ok_or_else(|| parse_err(format!("unknown node {:?}", &rec[1])))?;
        if rows.len() <= agent {
            rows.resize(agent + 1, Vec::new());
        }
        rows[agent].push(node);
    }
    TargetMatrix::new(rows)
}

fn write_opinions(theta: &[f64], network: &Network, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["node", "opinion"])?;
    for (i, t) in theta.iter().enumerate() {
        w.write_record([network.label(i).to_string(), t.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

// ---------------------------------------------------------------------------
// runs

/// Eval-horizon run with no agents.
pub fn simulate_baseline(network: &Network, cfg: &CampaignConfig) -> Result<Trajectory> {
    integrate(network, &TargetMatrix::empty(0), &mut silent, cfg.eval_horizon, cfg.substep, &cfg.model)
}

/// Eval-horizon run of the configured policy family with fixed targets.
pub fn simulate_policy(network: &Network, targets: &TargetMatrix, cfg: &CampaignConfig) -> Result<Trajectory> {
    let mut pol = make_policy(cfg.family, cfg.objective, cfg.policy, targets, &cfg.model);
    integrate(network, targets, pol.as_mut(), cfg.eval_horizon, cfg.substep, &cfg.model)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetingSummary {
    pub horizon: usize,
    pub baseline_objective: f64,
    pub best_objective: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignResult {
    pub objective: ObjectiveKind,
    pub family: PolicyFamily,
    pub nodes: usize,
    pub edges: usize,
    pub agents: usize,
    pub d_max: usize,
    pub eval_horizon: usize,
    pub baseline_objective: f64,
    pub policy_objective: f64,
    pub delta: ObjectiveDelta,
    /// Target labels per agent.
    pub targets: Vec<Vec<String>>,
    pub targeting: Option<TargetingSummary>,
    /// Files written, relative to the output directory.
    pub files: Vec<String>,
    #[serde(skip)]
    pub target_matrix: TargetMatrix,
    #[serde(skip)]
    pub baseline: Trajectory,
    #[serde(skip)]
    pub policy: Trajectory,
}

/// Greedy targeting followed by paired baseline and policy runs. Nothing is written.
pub fn compute_campaign(network: &Network, cfg: &CampaignConfig) -> Result<CampaignResult> {
    let (baseline, selected) = rayon::join(
        || simulate_baseline(network, cfg),
        || -> Result<_> {
            if cfg.agents == 0 {
                return Ok((TargetMatrix::empty(0), None));
            }
            let rep = greedy_targets_with_report(network, cfg.objective, cfg.agents, &cfg.targeting(), &cfg.model, &cfg.policy)?;
            let summary = TargetingSummary {
                horizon: cfg.targeting_horizon,
                baseline_objective: rep.baseline_objective,
                best_objective: rep.best_objective,
                evaluations: rep.evaluations,
            };
            Ok((rep.targets, Some(summary)))
        },
    );
    let baseline = baseline?;
    let (targets, targeting) = selected?;
    let policy = if cfg.agents == 0 {
        baseline.clone()
    } else {
        simulate_policy(network, &targets, cfg)?
    };

    let baseline_objective = cfg.objective.evaluate(baseline.final_opinions())?;
    let policy_objective = cfg.objective.evaluate(policy.final_opinions())?;
    Ok(CampaignResult {
        objective: cfg.objective,
        family: cfg.family,
        nodes: network.node_count(),
        edges: network.edge_count(),
        agents: cfg.agents,
        d_max: cfg.d_max,
        eval_horizon: cfg.eval_horizon,
        baseline_objective,
        policy_objective,
        delta: objective_delta(policy_objective, baseline_objective),
        targets: targets
            .rows()
            .iter()
            .map(|r| r.iter().map(|&i| network.label(i).to_string()).collect())
            .collect(),
        targeting,
        files: Vec::new(),
        target_matrix: targets,
        baseline,
        policy,
    })
}

/// Runs the campaign and writes every artifact into `cfg.out_dir`.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignResult> {
    run_campaign_with_format(cfg, OutputFormat::Csv)
}

pub fn run_campaign_with_format(cfg: &CampaignConfig, format: OutputFormat) -> Result<CampaignResult> {
    let network = cfg.load_network()?;
    let mut res = compute_campaign(&network, cfg)?;
    let dir = &cfg.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let node_columns = network.node_count() <= NODE_COLUMN_LIMIT;
    let ext = format.extension();

    let mut files: Vec<String> = Vec::new();
    fn emit(files: &mut Vec<String>, dir: &Path, name: String) -> PathBuf {
        let p = dir.join(&name);
        files.push(name);
        p
    }

    let p = emit(&mut files, dir, format!("trajectory_baseline.{ext}"));
    write_trajectory(&res.baseline, format, node_columns, create(&p)?)?;
    let p = emit(&mut files, dir, format!("trajectory_policy.{ext}"));
    write_trajectory(&res.policy, format, node_columns, create(&p)?)?;
    let p = emit(&mut files, dir, format!("policy_path.{ext}"));
    write_policy_path(&res.policy, format, create(&p)?)?;
    let p = emit(&mut files, dir, "opinions_initial.csv".into());
    write_opinions(res.baseline.initial_opinions(), &network, &p)?;
    let p = emit(&mut files, dir, "opinions_final_baseline.csv".into());
    write_opinions(res.baseline.final_opinions(), &network, &p)?;
    let p = emit(&mut files, dir, "opinions_final_policy.csv".into());
    write_opinions(res.policy.final_opinions(), &network, &p)?;
    for (name, theta) in [
        ("density_initial", res.baseline.initial_opinions()),
        ("density_final_baseline", res.baseline.final_opinions()),
        ("density_final_policy", res.policy.final_opinions()),
    ] {
        let p = emit(&mut files, dir, format!("{name}.csv"));
        let raw = export_density(theta, DEFAULT_BINS, &p)?;
        files.push(raw.file_name().unwrap().to_string_lossy().into_owned());
    }
    let p = emit(&mut files, dir, "targets.csv".into());
    write_targets(&res.target_matrix, &network, create(&p)?)?;
    files.push("summary.json".into());
    res.files = files;

    let p = dir.join("summary.json");
    let body = serde_json::to_string_pretty(&res)? + "\n";
    std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
    Ok(res)
}
