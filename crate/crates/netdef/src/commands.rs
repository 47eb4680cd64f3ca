//! Command implementations behind the CLI: training, evaluation and
//! replay, plus the run-directory manifest plumbing.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use netdef_core::adversaries::RedAgentKind;
use netdef_core::eval::{
    challenge_grid, BluePolicy, GreedyPolicy, HierarchicalGreedy, Scenario, SleepPolicy,
};
use netdef_core::hierarchy::{
    train_controller, train_sub_agent, SubAgentRegistry, TrainLog, BLINE_DEFENCE, MEANDER_DEFENCE,
};
use serde_json::json;

use crate::checkpoint::{
    load_hierarchy, load_sub_agent, save_hierarchy, save_sub_agent, SubAgentCheckpoint,
};
use crate::config::RunConfig;
use crate::episode_log::{find_episode, read_log, EpisodeEntry, LogWriter};
use crate::parallel::{evaluate_parallel, format_table};

/// Registry name for a specialist trained against this adversary.
pub fn defence_name(adversary: RedAgentKind) -> &'static str {
    match adversary {
        RedAgentKind::Bline => BLINE_DEFENCE,
        RedAgentKind::Meander => MEANDER_DEFENCE,
        RedAgentKind::Sleep => "sleep-defence",
    }
}

pub fn parse_adversary(name: &str) -> Result<RedAgentKind> {
    RedAgentKind::from_name(name)
        .with_context(|| format!("unknown adversary `{name}` (expected bline, meander or sleep)"))
}

/// Load the config file when given, then apply `--set` overrides.
pub fn resolve_config(config_path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
    let mut config = match config_path {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    config.apply_overrides(overrides)?;
    config.validate()?;
    Ok(config)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating run directory {}", dir.display()))
}

fn write_manifest(
    dir: &Path,
    command: &str,
    config: &RunConfig,
    seed: u64,
    outputs: &[&str],
    extra: serde_json::Value,
) -> Result<PathBuf> {
    let path = dir.join("manifest.json");
    let manifest = json!({
        "command": command,
        "seed": seed,
        "config_hash": format!("{:016x}", config.hash()),
        "outputs": outputs,
        "detail": extra,
    });
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn write_curve(dir: &Path, log: &TrainLog) -> Result<()> {
    let path = dir.join("curve.jsonl");
    let mut text = String::new();
    for point in &log.curve {
        text.push_str(&serde_json::to_string(&json!({
            "episodes": point.episodes,
            "env_steps": point.env_steps,
            "mean_score": point.mean_score,
        }))?);
        text.push('\n');
    }
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn cmd_train_sub(
    adversary: &str,
    config_path: Option<&Path>,
    overrides: &[String],
    budget: Option<usize>,
    seed: u64,
    out_dir: &Path,
) -> Result<()> {
    let adversary = parse_adversary(adversary)?;
    let config = resolve_config(config_path, overrides)?;
    let budget = budget.unwrap_or(config.sub_budget);
    ensure_dir(out_dir)?;

    let name = defence_name(adversary);
    let (policy, log) =
        train_sub_agent(adversary, &config.sim, &config.ppo, &config.icm, budget, seed)?;

    let ckpt_file = format!("{name}.ckpt");
    save_sub_agent(
        &out_dir.join(&ckpt_file),
        &SubAgentCheckpoint {
            name: name.to_string(),
            policy,
            icm: None,
        },
    )?;
    write_curve(out_dir, &log)?;
    write_manifest(
        out_dir,
        "train-sub",
        &config,
        seed,
        &[&ckpt_file, "curve.jsonl"],
        json!({
            "adversary": adversary.name(),
            "budget": budget,
            "episodes": log.episodes,
            "env_steps": log.env_steps,
            "converged": log.converged,
            "final_mean_score": log.final_mean_score,
        }),
    )?;
    println!(
        "trained {name}: {} episodes, {} env steps, final mean score {:.2}",
        log.episodes, log.env_steps, log.final_mean_score
    );
    Ok(())
}

pub fn cmd_train_controller(
    sub_paths: &[PathBuf],
    config_path: Option<&Path>,
    overrides: &[String],
    budget: Option<usize>,
    seed: u64,
    out_dir: &Path,
) -> Result<()> {
    if sub_paths.is_empty() {
        bail!("train-controller needs at least one --sub checkpoint");
    }
    let config = resolve_config(config_path, overrides)?;
    let budget = budget.unwrap_or(config.controller_budget);
    ensure_dir(out_dir)?;

    let mut registry = SubAgentRegistry::new();
    let mut pool = Vec::new();
    for path in sub_paths {
        let ckpt = load_sub_agent(path)?;
        // The training pool mirrors the specialists on board; unknown
        // names still register but train against the default pool.
        match ckpt.name.as_str() {
            BLINE_DEFENCE => pool.push(RedAgentKind::Bline),
            MEANDER_DEFENCE => pool.push(RedAgentKind::Meander),
            _ => {}
        }
        registry.push(&ckpt.name, ckpt.policy)?;
    }
    if pool.is_empty() {
        pool = vec![RedAgentKind::Bline, RedAgentKind::Meander];
    }

    let (policy, log) =
        train_controller(registry, &pool, &config.sim, &config.ppo, budget, seed)?;
    save_hierarchy(&out_dir.join("hierarchical.ckpt"), &policy)?;
    write_curve(out_dir, &log)?;
    write_manifest(
        out_dir,
        "train-controller",
        &config,
        seed,
        &["hierarchical.ckpt", "curve.jsonl"],
        json!({
            "sub_agents": policy.registry.iter().map(|(n, _)| n.to_string()).collect::<Vec<_>>(),
            "budget": budget,
            "episodes": log.episodes,
            "env_steps": log.env_steps,
            "converged": log.converged,
            "final_mean_score": log.final_mean_score,
        }),
    )?;
    println!(
        "trained controller over {} sub-agents: {} episodes, {} env steps",
        policy.registry.len(),
        log.episodes,
        log.env_steps
    );
    Ok(())
}

/// Build the per-worker policy factory for a checkpoint or named
/// built-in policy.
fn policy_factory(
    checkpoint: Option<&Path>,
    builtin: Option<&str>,
) -> Result<Box<dyn Fn() -> Box<dyn BluePolicy + Send> + Sync>> {
    match (checkpoint, builtin) {
        (Some(path), None) => {
            // A hierarchical container or a single specialist.
            match load_hierarchy(path) {
                Ok(policy) => Ok(Box::new(move || {
                    Box::new(HierarchicalGreedy::new(policy.clone()))
                })),
                Err(_) => {
                    let ckpt = load_sub_agent(path)?;
                    Ok(Box::new(move || {
                        Box::new(GreedyPolicy::new(ckpt.policy.clone()))
                    }))
                }
            }
        }
        (None, Some("sleep")) => Ok(Box::new(|| Box::new(SleepPolicy))),
        (None, Some(other)) => bail!("unknown built-in policy `{other}` (expected `sleep`)"),
        (None, None) => bail!("evaluate needs --checkpoint or --policy"),
        (Some(_), Some(_)) => bail!("--checkpoint and --policy are mutually exclusive"),
    }
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_evaluate(
    checkpoint: Option<&Path>,
    builtin: Option<&str>,
    config_path: Option<&Path>,
    overrides: &[String],
    adversary: Option<&str>,
    horizons: &[u32],
    episodes: Option<usize>,
    quick: bool,
    workers: Option<usize>,
    full_trace: bool,
    base_seed: Option<u64>,
    out_dir: &Path,
) -> Result<()> {
    let config = resolve_config(config_path, overrides)?;
    let episodes = episodes.unwrap_or(if quick { 100 } else { config.episodes });
    let workers = workers.unwrap_or(config.workers);
    let base_seed = base_seed.unwrap_or(config.base_seed);
    ensure_dir(out_dir)?;

    let adversary = adversary.map(parse_adversary).transpose()?;
    let scenarios: Vec<Scenario> = challenge_grid(episodes)
        .into_iter()
        .filter(|s| adversary.is_none_or(|a| s.adversary == a))
        .filter(|s| horizons.is_empty() || horizons.contains(&s.horizon))
        .collect();
    if scenarios.is_empty() {
        bail!("scenario selection is empty");
    }

    let factory = policy_factory(checkpoint, builtin)?;
    let (table, episodes_run) =
        evaluate_parallel(factory, &scenarios, &config.sim, base_seed, workers)?;

    let mut log = LogWriter::create(&out_dir.join("episodes.jsonl"))?;
    for (si, record) in &episodes_run {
        log.write(&EpisodeEntry::from_record(&scenarios[*si], record, full_trace))?;
    }
    log.finish()?;

    let text = format_table(&table);
    print!("{text}");
    fs::write(out_dir.join("table.txt"), &text)?;
    write_manifest(
        out_dir,
        "evaluate",
        &config,
        base_seed,
        &["episodes.jsonl", "table.txt"],
        json!({
            "episodes_per_scenario": episodes,
            "workers": workers,
            "scenarios": scenarios.len(),
            "final_score": table.final_score(),
        }),
    )?;
    Ok(())
}

pub fn cmd_replay(log_path: &Path, seed: u64, adversary: Option<&str>) -> Result<()> {
    let adversary = adversary.map(parse_adversary).transpose()?;
    let entries = read_log(log_path)?;
    let episode = find_episode(&entries, log_path, seed, adversary)?;
    let steps = episode
        .steps
        .as_ref()
        .ok_or(crate::episode_log::LogError::NoTrace { seed })?;

    println!(
        "episode: adversary={} horizon={} seed={} score={:.2}",
        episode.adversary, episode.horizon, episode.seed, episode.score
    );
    let mut total = 0.0;
    let mut previous = "0".repeat(steps.first().map_or(0, |s| s.obs.len()));
    for step in steps {
        let changed: Vec<String> = previous
            .chars()
            .zip(step.obs.chars())
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(i, _)| i.to_string())
            .collect();
        println!(
            "{:>4}  red={:<24} blue={:<22} reward={:>7.2}  changed_bits=[{}]",
            step.step,
            step.red,
            step.blue,
            step.reward,
            changed.join(",")
        );
        total += step.reward;
        previous = step.obs.clone();
    }
    println!("total reward: {total:.2}");
    if (total - episode.score).abs() > 1e-9 {
        bail!(
            "step rewards sum to {total} but the log records score {}",
            episode.score
        );
    }
    Ok(())
}
