mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::CliError;
use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "asnets", version, about = "Train and inspect action schema networks for probabilistic planning")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Master seed; overrides every seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for rollouts and teachers.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Same as `--jobs 1`.
    #[arg(long, global = true)]
    single_thread: bool,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Wall-clock limit for every training run, in seconds.
    #[arg(long, global = true)]
    time_budget: Option<f64>,
    /// Print the merged configuration as JSON and exit.
    #[arg(long, global = true)]
    dump_effective_config: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ground a problem and print counts as JSON.
    Ground(commands::GroundArgs),
    /// Print teacher Q-values and labels for a state.
    Teach(commands::TeachArgs),
    /// Print heuristic values and LM-cut landmarks for a state.
    InspectHeuristic(commands::StateArgs),
    /// Train a network on a set of problems.
    Train(commands::TrainArgs),
    /// Train with L1 and prune small weights, or prune an existing checkpoint.
    Sparsify(commands::SparsifyArgs),
    /// Measure coverage of a checkpoint on a set of problems.
    Eval(commands::EvalArgs),
    /// Run one policy rollout and print the trace.
    Rollout(commands::RolloutArgs),
    /// Depth against chain-length coverage table on the two-chain family.
    ReceptiveField(commands::ReceptiveArgs),
    /// Print the lifted equations of a (sparse) checkpoint.
    ExportEquations(commands::EquationArgs),
    /// Dump every module activation along one rollout.
    #[command(alias = "inspect-net")]
    ExportActivations(commands::ActivationArgs),
    /// Check a published sparse policy.
    VerifySparse(commands::VerifyArgs),
    /// Write a generated domain and problem.
    GenDomain(commands::GenArgs),
}

fn effective_config(g: &GlobalArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = g.seed {
        cfg.set_seed(seed);
    }
    if let Some(jobs) = g.jobs {
        cfg.jobs = jobs;
    }
    if g.single_thread {
        cfg.jobs = 1;
    }
    if let Some(t) = g.time_budget {
        cfg.set_time_budget(t);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ASNET_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cfg = match effective_config(&cli.global) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    if cli.global.dump_effective_config {
        println!("{}", cfg.to_json());
        return ExitCode::SUCCESS;
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build_global() {
        log::warn!("thread pool already initialised: {e}");
    }
    let Some(command) = cli.command else {
        eprintln!("error: no subcommand given\n\n{}", <Cli as clap::CommandFactory>::command().render_usage());
        return ExitCode::from(2);
    };
    match commands::run(command, &cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Verification(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
