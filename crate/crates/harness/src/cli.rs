use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use contextual_games::analysis::analyze;
use contextual_games::game::{ContextualGame, GameTrace};
use contextual_games::routing::{k_shortest_routes, load_tntp, parse_net, Route};

use crate::config::{default_data_dir, ExperimentConfig, Preset};
use crate::error::{HarnessError, Result};
use crate::experiment::run_experiment;
use crate::learners::{LearnerConfig, LearnerSpec};
use crate::spec::{GameSpec, RoutingSpec};

#[derive(Debug, Parser)]
#[command(name = "cgames", version, about = "Simulate and analyse repeated contextual games")]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "CGAMES_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Play an experiment and write traces, analyses and aggregates.
    Run(RunArgs),
    /// Analyse a saved trace against its game description.
    Analyze(AnalyzeArgs),
    /// Dump the enumerated routes of a TNTP network.
    Routes(RoutesArgs),
    /// Summarise a TNTP network and trip table.
    NetInfo(NetInfoArgs),
}

#[derive(Debug, Args, Default)]
pub struct RunArgs {
    /// JSON experiment config; other flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// synthetic-small | sioux-falls | custom
    #[arg(long)]
    pub preset: Option<String>,
    /// Game description for the custom preset.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Learner kinds to run with default hyperparameters (repeatable).
    #[arg(long = "learner")]
    pub learners: Vec<String>,
    #[arg(long = "T", visible_alias = "rounds")]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, env = "CGAMES_OUTPUT_DIR")]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub noise_std: Option<f64>,
    /// Routing games: keep this many evenly spaced agents.
    #[arg(long)]
    pub agents: Option<usize>,
    /// Routing games: multiply every OD demand by this factor.
    #[arg(long)]
    pub demand_multiplier: Option<f64>,
    /// Directory with the Sioux-Falls TNTP files.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    pub save_trace_json: bool,
    #[arg(long)]
    pub no_analysis: bool,
    /// Poll learners one after another instead of concurrently.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Trace saved as `trace.json`.
    #[arg(long)]
    pub trace: PathBuf,
    /// Game description (`game.json` of a run, or a hand-written spec).
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long)]
    pub smoothness_mu: Option<f64>,
    #[arg(long)]
    pub conservative: bool,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RoutesArgs {
    #[arg(long)]
    pub net: PathBuf,
    #[arg(long)]
    pub origin: usize,
    #[arg(long)]
    pub destination: usize,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct NetInfoArgs {
    #[arg(long)]
    pub net: PathBuf,
    #[arg(long)]
    pub trips: Option<PathBuf>,
    #[arg(long)]
    pub nodes: Option<PathBuf>,
}

/// Assembles the experiment config from a file or preset plus overrides.
pub fn build_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let data_dir = args.data_dir.clone().unwrap_or_else(default_data_dir);
    let mut config = match (&args.config, args.preset.as_deref()) {
        (Some(_), Some(_)) => return Err(HarnessError::config("preset", "give either --config or --preset")),
        (Some(path), None) => ExperimentConfig::load(path)?,
        (None, Some("custom")) => {
            let path = args
                .spec
                .as_ref()
                .ok_or_else(|| HarnessError::config("spec", "the custom preset needs --spec"))?;
            let mut game = GameSpec::load(path)?;
            if let Some(dir) = path.parent() {
                game.rebase(dir);
            }
            let mut c = Preset::SyntheticSmall.config(&data_dir);
            c.game = game;
            c.rounds = 100;
            c.runs = 5;
            c.output_dir = PathBuf::from("out/custom");
            c
        }
        (None, Some(name)) => Preset::parse(name)
            .ok_or_else(|| {
                HarnessError::config("preset", format!("unknown preset `{name}` (synthetic-small, sioux-falls, custom)"))
            })?
            .config(&data_dir),
        (None, None) => return Err(HarnessError::config("preset", "give --config or --preset")),
    };
    if args.spec.is_some() && args.preset.as_deref() != Some("custom") {
        return Err(HarnessError::config("spec", "--spec is only read by the custom preset"));
    }
    if !args.learners.is_empty() {
        config.learners = args
            .learners
            .iter()
            .enumerate()
            .map(|(i, k)| {
                LearnerSpec::from_kind(k).map(LearnerConfig::uniform).ok_or_else(|| {
                    HarnessError::config(
                        format!("learner[{i}]"),
                        format!("unknown learner `{k}`; expected one of {}", LearnerSpec::KINDS.join(", ")),
                    )
                })
            })
            .collect::<Result<_>>()?;
    }
    if let Some(t) = args.rounds {
        config.rounds = t;
    }
    if let Some(r) = args.runs {
        config.runs = r;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(o) = &args.output_dir {
        config.output_dir = o.clone();
    }
    if let Some(n) = args.noise_std {
        config.noise_std = n;
    }
    if let Some(n) = args.agents {
        match &mut config.game {
            GameSpec::Routing(RoutingSpec { agents, .. }) => *agents = Some(n),
            _ => return Err(HarnessError::config("agents", "only routing games have agents to subsample")),
        }
    }
    if let Some(m) = args.demand_multiplier {
        match &mut config.game {
            GameSpec::Routing(r) => r.demand_multiplier = m,
            _ => return Err(HarnessError::config("demand_multiplier", "only routing games have demands")),
        }
    }
    config.save_trace_json |= args.save_trace_json;
    if args.no_analysis {
        config.analysis.enabled = false;
    }
    config.sequential_polling |= args.sequential;
    config.validate()?;
    Ok(config)
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::Other(e.to_string()))?;
    match out {
        Some(path) => std::fs::write(path, text + "\n").map_err(|e| HarnessError::io(path, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{text}").map_err(|e| HarnessError::io("<stdout>", e))
        }
    }
}

pub fn cmd_run(args: &RunArgs) -> Result<()> {
    let config = build_config(args)?;
    let summary = run_experiment(&config)?;
    for l in &summary.learners {
        eprintln!(
            "{:<20} final loss {:.4} ± {:.4}   congestion {:.4} ± {:.4}",
            l.label, l.final_loss_mean, l.final_loss_std, l.congestion_mean, l.congestion_std
        );
    }
    eprintln!("wrote {}", config.output_dir.display());
    Ok(())
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<()> {
    let mut spec = GameSpec::load(&args.spec)?;
    if let Some(dir) = args.spec.parent() {
        spec.rebase(dir);
    }
    spec.validate("spec")?;
    let game = spec.build()?;
    let file = std::fs::File::open(&args.trace).map_err(|e| HarnessError::io(&args.trace, e))?;
    let trace = GameTrace::from_json(std::io::BufReader::new(file))?;
    if trace.num_players() != game.num_players() {
        return Err(HarnessError::Other(format!(
            "trace has {} players, the game {}",
            trace.num_players(),
            game.num_players()
        )));
    }
    if let Some(row) = trace.rows().iter().find(|r| !game.accepts_context(&r.context)) {
        return Err(HarnessError::Other(format!("round {}: context is outside the game's context space", row.round)));
    }
    trace.verify_rewards(&game)?;
    let options = crate::config::AnalysisSettings {
        enabled: true,
        delta: args.delta,
        smoothness_mu: args.smoothness_mu,
        conservative: args.conservative,
    }
    .options(game.context_generator().distribution());
    let report = analyze(&trace, &game, &options)?;
    emit(&report, args.out.as_deref())
}

#[derive(Serialize)]
struct RoutesReport {
    origin: usize,
    destination: usize,
    incomplete: bool,
    routes: Vec<Route>,
}

pub fn cmd_routes(args: &RoutesArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.net).map_err(|e| HarnessError::io(&args.net, e))?;
    let net = parse_net(&text)?;
    let set = k_shortest_routes(&net, args.origin, args.destination, args.k)?;
    emit(
        &RoutesReport {
            origin: args.origin,
            destination: args.destination,
            incomplete: set.incomplete,
            routes: set.routes,
        },
        None,
    )
}

#[derive(Serialize)]
struct NetInfo {
    nodes: usize,
    zones: usize,
    first_thru_node: usize,
    edges: usize,
    total_capacity: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    od_pairs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    total_demand: Option<f64>,
}

pub fn cmd_net_info(args: &NetInfoArgs) -> Result<()> {
    let (net, trips) = match &args.trips {
        Some(trips) => {
            let (net, od) = load_tntp(&args.net, trips, args.nodes.as_deref())?;
            (net, Some(od))
        }
        None => {
            let text = std::fs::read_to_string(&args.net).map_err(|e| HarnessError::io(&args.net, e))?;
            (parse_net(&text)?, None)
        }
    };
    emit(
        &NetInfo {
            nodes: net.num_nodes,
            zones: net.num_zones,
            first_thru_node: net.first_thru_node,
            edges: net.num_edges(),
            total_capacity: net.capacities().iter().sum(),
            od_pairs: trips.as_ref().map(|t| t.len()),
            total_demand: trips.as_ref().map(|t| t.iter().map(|d| d.demand).sum()),
        },
        None,
    )
}

pub fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Routes(a) => cmd_routes(a),
        Command::NetInfo(a) => cmd_net_info(a),
    }
}
