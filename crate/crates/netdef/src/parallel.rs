//! Worker-parallel evaluation. Every episode is independently seeded,
//! so the schedule never affects the numbers: results are reduced in
//! (scenario, episode) order and are identical for any worker count.

use std::sync::mpsc;
use std::thread;

use netdef_core::eval::{mean_and_std, run_episode, BluePolicy, EpisodeRecord, Scenario, ScenarioScore, ScoreTable};
use netdef_core::netsim::{SimConfig, SimError};

/// One evaluated episode with its position in the grid.
pub type IndexedEpisode = (usize, EpisodeRecord);

/// Evaluate `scenarios` across `workers` threads. `make_policy` builds
/// a fresh, independent policy per worker. Returns the score table and
/// every episode record tagged with its scenario index, sorted by
/// (scenario index, seed).
pub fn evaluate_parallel<F>(
    make_policy: F,
    scenarios: &[Scenario],
    base_config: &SimConfig,
    base_seed: u64,
    workers: usize,
) -> Result<(ScoreTable, Vec<IndexedEpisode>), SimError>
where
    F: Fn() -> Box<dyn BluePolicy + Send> + Sync,
{
    assert!(workers > 0, "need at least one worker");

    // Flatten the grid into (scenario index, episode index) tasks.
    let tasks: Vec<(usize, usize)> = scenarios
        .iter()
        .enumerate()
        .flat_map(|(si, s)| (0..s.episodes).map(move |ei| (si, ei)))
        .collect();

    let mut episodes: Vec<IndexedEpisode> = if workers == 1 {
        let mut policy = make_policy();
        let mut out = Vec::with_capacity(tasks.len());
        for (si, ei) in tasks {
            let scenario = &scenarios[si];
            let record = run_episode(
                policy.as_mut(),
                scenario.adversary,
                base_config,
                scenario.horizon,
                base_seed + ei as u64,
            )?;
            out.push((si, record));
        }
        out
    } else {
        let (tx, rx) = mpsc::channel::<Result<IndexedEpisode, SimError>>();
        thread::scope(|scope| {
            for worker in 0..workers {
                let tx = tx.clone();
                let tasks = &tasks;
                let make_policy = &make_policy;
                scope.spawn(move || {
                    let mut policy = make_policy();
                    // Round-robin split; any split works because each
                    // episode reseeds the environment and the policy.
                    for (si, ei) in tasks.iter().skip(worker).step_by(workers) {
                        let scenario = &scenarios[*si];
                        let result = run_episode(
                            policy.as_mut(),
                            scenario.adversary,
                            base_config,
                            scenario.horizon,
                            base_seed + *ei as u64,
                        )
                        .map(|record| (*si, record));
                        if tx.send(result).is_err() {
                            break;
                        }
                    }
                });
            }
            drop(tx);
            let mut out = Vec::with_capacity(tasks.len());
            for result in rx {
                out.push(result?);
            }
            Ok::<_, SimError>(out)
        })?
    };

    episodes.sort_by_key(|(si, record)| (*si, record.seed));

    let mut rows = Vec::with_capacity(scenarios.len());
    for (si, scenario) in scenarios.iter().enumerate() {
        let scores: Vec<f64> = episodes
            .iter()
            .filter(|(i, _)| *i == si)
            .map(|(_, r)| r.score)
            .collect();
        debug_assert_eq!(scores.len(), scenario.episodes);
        let (mean, std) = mean_and_std(&scores);
        rows.push(ScenarioScore {
            scenario: *scenario,
            mean,
            std,
            scores,
        });
    }
    Ok((ScoreTable { rows }, episodes))
}

/// Render a score table as fixed-width text, one scenario per row plus
/// the protocol's final score (mean of row means).
pub fn format_table(table: &ScoreTable) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<10} {:>8} {:>10} {:>10} {:>9}\n",
        "adversary", "horizon", "mean", "std", "episodes"
    ));
    for row in &table.rows {
        out.push_str(&format!(
            "{:<10} {:>8} {:>10.2} {:>10.2} {:>9}\n",
            row.scenario.adversary.name(),
            row.scenario.horizon,
            row.mean,
            row.std,
            row.scenario.episodes
        ));
    }
    out.push_str(&format!("final score: {:.2}\n", table.final_score()));
    out
}
