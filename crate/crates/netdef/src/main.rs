//! `netdef`: train and evaluate the hierarchical network defender.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use netdef::commands;

/// Seed precedence: explicit flag, then NETDEF_SEED, then 0.
fn resolve_seed(flag: Option<u64>) -> u64 {
    flag.or_else(|| {
        std::env::var("NETDEF_SEED")
            .ok()
            .and_then(|v| v.parse().ok())
    })
    .unwrap_or(0)
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// Run configuration file (flat `section.key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config value, e.g. --set ppo.lr=1e-3. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Parser)]
#[command(name = "netdef", version, about = "Network-defence game, RL defender and evaluation harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one specialist sub-agent against a fixed adversary.
    TrainSub {
        /// Adversary to train against: bline, meander or sleep.
        #[arg(long)]
        adversary: String,
        #[command(flatten)]
        config: ConfigArgs,
        /// Environment-step budget (defaults to train.sub_budget).
        #[arg(long)]
        budget: Option<usize>,
        /// Training seed (default: NETDEF_SEED or 0).
        #[arg(long)]
        seed: Option<u64>,
        /// Run directory for the checkpoint, curve and manifest.
        #[arg(long, default_value = "run")]
        out: PathBuf,
    },
    /// Train the controller over frozen sub-agent checkpoints.
    TrainController {
        /// Sub-agent checkpoint. Repeat once per specialist.
        #[arg(long = "sub", value_name = "CKPT", required = true)]
        subs: Vec<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
        /// Environment-step budget (defaults to train.controller_budget).
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "run")]
        out: PathBuf,
    },
    /// Score a policy over the evaluation grid.
    Evaluate {
        /// Hierarchical or sub-agent checkpoint to evaluate.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Built-in policy instead of a checkpoint (only `sleep`).
        #[arg(long)]
        policy: Option<String>,
        #[command(flatten)]
        config: ConfigArgs,
        /// Restrict to one adversary: bline, meander or sleep.
        #[arg(long)]
        adversary: Option<String>,
        /// Restrict to these horizons. Repeatable; default 30, 50, 100.
        #[arg(long = "horizon")]
        horizons: Vec<u32>,
        /// Episodes per scenario (overrides eval.episodes / --quick).
        #[arg(long)]
        episodes: Option<usize>,
        /// Shortcut for 100 episodes per scenario.
        #[arg(long)]
        quick: bool,
        /// Parallel rollout workers; any value gives identical results.
        #[arg(long)]
        workers: Option<usize>,
        /// Record every step of every episode in the log.
        #[arg(long)]
        full_trace: bool,
        /// Base seed; episode i of a scenario uses base seed + i.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "run")]
        out: PathBuf,
    },
    /// Print the transcript of one logged episode.
    Replay {
        /// episodes.jsonl written by `evaluate --full-trace`.
        #[arg(long)]
        log: PathBuf,
        /// Episode seed to replay.
        #[arg(long)]
        seed: u64,
        /// Disambiguate when scenarios share a seed range.
        #[arg(long)]
        adversary: Option<String>,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::TrainSub {
            adversary,
            config,
            budget,
            seed,
            out,
        } => commands::cmd_train_sub(
            &adversary,
            config.config.as_deref(),
            &config.overrides,
            budget,
            resolve_seed(seed),
            &out,
        ),
        Command::TrainController {
            subs,
            config,
            budget,
            seed,
            out,
        } => commands::cmd_train_controller(
            &subs,
            config.config.as_deref(),
            &config.overrides,
            budget,
            resolve_seed(seed),
            &out,
        ),
        Command::Evaluate {
            checkpoint,
            policy,
            config,
            adversary,
            horizons,
            episodes,
            quick,
            workers,
            full_trace,
            seed,
            out,
        } => commands::cmd_evaluate(
            checkpoint.as_deref(),
            policy.as_deref(),
            config.config.as_deref(),
            &config.overrides,
            adversary.as_deref(),
            &horizons,
            episodes,
            quick,
            workers,
            full_trace,
            seed,
            &out,
        ),
        Command::Replay {
            log,
            seed,
            adversary,
        } => commands::cmd_replay(&log, seed, adversary.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
