use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use nudgecast::campaign::{
    self, read_targets, write_policy_path, write_targets, write_trajectory, CampaignConfig, OutputFormat,
    RawConfig, NODE_COLUMN_LIMIT,
};
use nudgecast::llm::{self, EndpointConfig, RenderOptions};
use nudgecast::oracle::{counterexample_suite_with_witness, WitnessSearch};
use nudgecast::targeting::greedy_targets_with_report;

#[derive(Parser)]
#[command(name = "nudgecast", version, about = "Opinion-dynamics influence campaign simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the network with no agents.
    #[command(allow_negative_numbers = true)]
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Write the trajectory here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Select targets greedily and emit `agent,node` rows.
    #[command(allow_negative_numbers = true)]
    Target {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Emit agent opinions u_a(t) for a given target file.
    #[command(allow_negative_numbers = true)]
    Policy {
        #[command(flatten)]
        common: Common,
        /// `agent,node` CSV as written by `target`.
        #[arg(long)]
        targets: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Full campaign: targeting, baseline and policy runs, all exports.
    #[command(allow_negative_numbers = true)]
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Recompute the reference counterexamples and search for an agent-count witness.
    Oracle {
        /// Machine-readable report.
        #[arg(long, default_value = "oracle_summary.json")]
        summary: PathBuf,
        /// Where to persist the witness instance, if one is found.
        #[arg(long)]
        witness: Option<PathBuf>,
        #[arg(long, default_value_t = WitnessSearch::default().seed)]
        seed: u64,
        #[arg(long, default_value_t = WitnessSearch::default().max_instances)]
        max_instances: usize,
    },
    /// Build prompts (and optionally completions) for a policy path.
    RenderContent(RenderArgs),
}

#[derive(Args)]
struct Common {
    /// TOML config; flags below override its keys.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = ["csv", "ndjson"], default_value = "csv")]
    format: String,

    #[arg(long)]
    edges: Option<PathBuf>,
    #[arg(long)]
    opinions: Option<PathBuf>,
    /// Per-node posting rates; edges then only list who follows whom.
    #[arg(long)]
    rates: Option<PathBuf>,
    /// Built-in network generator (`path`).
    #[arg(long)]
    generator: Option<String>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    sample: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    lambda_max: Option<f64>,
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    objective: Option<String>,
    #[arg(long)]
    agents: Option<usize>,
    #[arg(long)]
    d_max: Option<usize>,
    #[arg(long)]
    consideration_size: Option<usize>,
    #[arg(long)]
    targeting_horizon: Option<usize>,
    #[arg(long)]
    eval_horizon: Option<usize>,
    #[arg(long)]
    substep: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> Result<CampaignConfig> {
        let mut raw = match &self.config {
            Some(p) => RawConfig::from_file(p)?,
            None => RawConfig::default(),
        };
        fn set<T: Clone>(slot: &mut Option<T>, flag: &Option<T>) {
            if flag.is_some() {
                *slot = flag.clone();
            }
        }
        // files given on the command line replace a generator from the config and vice versa
        if self.edges.is_some() || self.opinions.is_some() {
            raw.network.generator = None;
        }
        if self.generator.is_some() {
            raw.network.edges = None;
            raw.network.opinions = None;
            raw.network.rates = None;
        }
        set(&mut raw.network.edges, &self.edges);
        set(&mut raw.network.opinions, &self.opinions);
        set(&mut raw.network.rates, &self.rates);
        set(&mut raw.network.generator, &self.generator);
        set(&mut raw.network.nodes, &self.nodes);
        set(&mut raw.network.sample, &self.sample);
        set(&mut raw.model.epsilon, &self.epsilon);
        set(&mut raw.model.omega, &self.omega);
        set(&mut raw.model.lambda_max, &self.lambda_max);
        set(&mut raw.policy.family, &self.family);
        set(&mut raw.policy.gamma, &self.gamma);
        set(&mut raw.objective, &self.objective);
        set(&mut raw.agents.count, &self.agents);
        set(&mut raw.agents.d_max, &self.d_max);
        set(&mut raw.targeting.consideration_size, &self.consideration_size);
        set(&mut raw.targeting.horizon, &self.targeting_horizon);
        set(&mut raw.eval.horizon, &self.eval_horizon);
        set(&mut raw.integrator.substep, &self.substep);
        set(&mut raw.seed, &self.seed);
        set(&mut raw.out_dir, &self.out_dir);
        Ok(raw.resolve()?)
    }

    fn format(&self) -> OutputFormat {
        self.format.parse().expect("restricted by clap")
    }
}

#[derive(Args)]
struct RenderArgs {
    /// Policy path with columns `t,u` (an `agent` column selects rows by --agent).
    #[arg(long)]
    policy: PathBuf,
    #[arg(long, default_value_t = 0)]
    agent: usize,
    #[arg(long)]
    topic: String,
    #[arg(long, default_value = "tweet")]
    content_type: String,
    #[arg(long, default_value_t = llm::DEFAULT_SCALE.0, allow_hyphen_values = true)]
    scale_min: i64,
    #[arg(long, default_value_t = llm::DEFAULT_SCALE.1, allow_hyphen_values = true)]
    scale_max: i64,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[arg(long, default_value_t = 4)]
    concurrency: usize,
    /// Send requests to the endpoint; without it only prompts are produced.
    #[arg(long)]
    live: bool,
    #[arg(long, default_value_t = EndpointConfig::default().base_url)]
    base_url: String,
    #[arg(long, default_value_t = EndpointConfig::default().model)]
    model: String,
    #[arg(long, default_value_t = EndpointConfig::default().api_key_env)]
    api_key_env: String,
    #[arg(long, default_value_t = 60)]
    timeout_secs: u64,
    #[arg(long, value_parser = ["csv", "ndjson"], default_value = "csv")]
    format: String,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn simulate(common: &Common, output: &Option<PathBuf>) -> Result<()> {
    let cfg = common.config()?;
    let net = cfg.load_network()?;
    let traj = campaign::simulate_baseline(&net, &cfg)?;
    write_trajectory(&traj, common.format(), net.node_count() <= NODE_COLUMN_LIMIT, sink(output)?)?;
    Ok(())
}

fn target(common: &Common, output: &Option<PathBuf>) -> Result<()> {
    let cfg = common.config()?;
    let net = cfg.load_network()?;
    let rep = greedy_targets_with_report(&net, cfg.objective, cfg.agents, &cfg.targeting(), &cfg.model, &cfg.policy)?;
    log::info!(
        "objective {} over {} steps: {} without agents, {} with {} targets ({} evaluations)",
        cfg.objective,
        cfg.targeting_horizon,
        rep.baseline_objective,
        rep.best_objective,
        rep.targets.target_count(),
        rep.evaluations
    );
    write_targets(&rep.targets, &net, sink(output)?)?;
    Ok(())
}

fn policy(common: &Common, targets: &Path, output: &Option<PathBuf>) -> Result<()> {
    let cfg = common.config()?;
    let net = cfg.load_network()?;
    let x = read_targets(targets, &net)?;
    let traj = campaign::simulate_policy(&net, &x, &cfg)?;
    write_policy_path(&traj, common.format(), sink(output)?)?;
    Ok(())
}

fn run(common: &Common) -> Result<()> {
    let cfg = common.config()?;
    let res = campaign::run_campaign_with_format(&cfg, common.format())?;
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, &res)?;
    writeln!(out)?;
    Ok(())
}

/// Returns whether every gating check passed.
fn oracle(summary: &Path, witness_path: &Option<PathBuf>, seed: u64, max_instances: usize) -> Result<bool> {
    let search = WitnessSearch {
        seed,
        max_instances,
        ..WitnessSearch::default()
    };
    let (reports, witness) = counterexample_suite_with_witness(&search)?;
    let mut out = io::stdout().lock();
    for r in &reports {
        let status = match (r.passed, r.gate) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "info",
        };
        writeln!(out, "{status:4}  {:38} {}", r.case, r.detail)?;
    }
    std::fs::write(summary, serde_json::to_string_pretty(&reports)? + "\n")
        .with_context(|| format!("writing {}", summary.display()))?;
    if let (Some(path), Some(w)) = (witness_path, &witness) {
        w.save(path)?;
    }
    Ok(!reports.iter().any(|r| r.failed_gate()))
}

fn render(args: &RenderArgs) -> Result<()> {
    let points = llm::read_policy_csv(&args.policy, args.agent)?;
    let opts = RenderOptions {
        topic: args.topic.clone(),
        content_type: args.content_type.clone(),
        scale: (args.scale_min, args.scale_max),
        stride: args.stride,
        concurrency: args.concurrency,
    };
    let endpoint = EndpointConfig {
        base_url: args.base_url.clone(),
        model: args.model.clone(),
        api_key_env: args.api_key_env.clone(),
        timeout: Duration::from_secs(args.timeout_secs),
        dry_run: !args.live,
    };
    let rows = llm::render_content(&points, &opts, &endpoint, &llm::UreqTransport)?;
    let format: OutputFormat = args.format.parse()?;
    llm::write_rendered(&rows, format, sink(&args.output)?)?;
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> ExitCode {
    match err.downcast_ref::<nudgecast::Error>() {
        Some(e) if e.is_validation() => ExitCode::from(2),
        _ => ExitCode::FAILURE,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { common, output } => simulate(common, output),
        Command::Target { common, output } => target(common, output),
        Command::Policy { common, targets, output } => policy(common, targets, output),
        Command::Run { common } => run(common),
        Command::Oracle {
            summary,
            witness,
            seed,
            max_instances,
        } => match oracle(summary, witness, *seed, *max_instances) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::FAILURE,
            Err(e) => Err(e),
        },
        Command::RenderContent(args) => render(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}
