//! `faultline` command-line driver.
//!
//! Exit codes: 0 success, 2 validation or configuration failure,
//! 3 baseline failure, 4 client failure, 1 any other error.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use faultline::evalcore::Clock;
use faultline::pipeline::{
    cmd_evaluate, cmd_generate, cmd_ingest, cmd_report, cmd_validate, AgentSpec, PipelineConfig, PipelineError,
    TaskFilter,
};
use faultline::taskgen::TaskMode;
use faultline_service::{serve, BusyPolicy, ServiceConfig};

#[derive(Debug, Parser)]
#[command(name = "faultline", version, about = "Generate and evaluate code-repair tasks from a Python repository")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML configuration file; flags below override its values.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Root seed for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Task store directory.
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    /// Repository root.
    #[arg(long, global = true)]
    repo: Option<PathBuf>,
    /// Budget preset (xs, small, default, xl) or `tools/attempts`.
    #[arg(long, global = true)]
    budget: Option<String>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Record wall-clock event times instead of logical ones.
    #[arg(long, global = true)]
    wall_clock: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse the repository and write its snapshot and metrics.
    Ingest,
    /// Generate and validate tasks into the store.
    Generate,
    /// Re-check every stored task against the pristine repository.
    Validate,
    /// Run an agent over stored tasks.
    Evaluate(EvaluateArgs),
    /// Serve the session REST API.
    Serve(ServeArgs),
    /// Write analysis tables from stored trajectories.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// oracle, null, competence:<c>, replay:<dir> or live.
    #[arg(long)]
    agent: String,
    /// Restrict to one task mode.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<TaskMode>,
    /// Restrict to these task ids (repeatable).
    #[arg(long = "task")]
    tasks: Vec<String>,
    /// Restrict to the hard set.
    #[arg(long)]
    hard_set: bool,
    /// Restrict to tasks with this many corruptions.
    #[arg(long)]
    corruptions: Option<usize>,
    /// Re-run tasks that already have a trajectory.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Queue concurrent requests on one session instead of rejecting them.
    #[arg(long)]
    wait_when_busy: bool,
    /// Idle sessions are closed and scored after this many seconds.
    #[arg(long, default_value_t = 7200)]
    idle_timeout: u64,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Analyse only tasks in the hard set.
    #[arg(long)]
    hard_set_only: bool,
}

fn parse_mode(s: &str) -> Result<TaskMode, String> {
    match s {
        "remove" => Ok(TaskMode::Remove),
        "discovery" => Ok(TaskMode::Discovery),
        _ => Err(format!("unknown mode {s}; expected remove or discovery")),
    }
}

fn load_config(args: &GlobalArgs) -> Result<PipelineConfig, PipelineError> {
    let mut config = match &args.config {
        Some(path) => PipelineConfig::from_file(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(store) = &args.store {
        config.store = store.clone();
    }
    if let Some(repo) = &args.repo {
        config.repo.root = repo.clone();
    }
    if let Some(budget) = &args.budget {
        config.evaluation.budget = budget.clone();
    }
    if let Some(jobs) = args.jobs {
        config.evaluation.jobs = jobs;
    }
    if args.wall_clock {
        config.evaluation.clock = Clock::Wall;
    }
    config.validate()?;
    Ok(config)
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("summary serializes"));
}

fn run(cli: Cli) -> Result<i32, PipelineError> {
    let mut config = load_config(&cli.global)?;
    match cli.command {
        Command::Ingest => print_json(&cmd_ingest(&config)?),
        Command::Generate => {
            let report = cmd_generate(&config)?;
            log::info!("{} task(s) written to {}", report.task_ids.len(), config.store.display());
            print_json(&report);
        }
        Command::Validate => print_json(&cmd_validate(&config)?),
        Command::Evaluate(args) => {
            let spec: AgentSpec = args.agent.parse()?;
            let filter = TaskFilter {
                mode: args.mode,
                ids: args.tasks,
                hard_set: args.hard_set,
                corruption_count: args.corruptions,
            };
            let summary = cmd_evaluate(&config, &spec, &filter, args.force)?;
            print_json(&summary);
            return Ok(summary.exit_code());
        }
        Command::Serve(args) => {
            let mut service = ServiceConfig::new(&config.store, &config.repo.root);
            service.runner = config.runner();
            service.read_threshold = config.evaluation.read_threshold;
            service.clock = config.evaluation.clock;
            service.default_budget = config.evaluation.budget.clone();
            service.idle_timeout = std::time::Duration::from_secs(args.idle_timeout);
            service.busy = if args.wait_when_busy { BusyPolicy::Wait } else { BusyPolicy::Reject };
            let served = tokio::runtime::Runtime::new().and_then(|rt| rt.block_on(serve(service, args.addr)));
            if let Err(e) = served {
                log::error!("cannot serve on {}: {e}", args.addr);
                return Ok(1);
            }
        }
        Command::Report(args) => {
            config.report.hard_set_only |= args.hard_set_only;
            print_json(&cmd_report(&config)?);
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
