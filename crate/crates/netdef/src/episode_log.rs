//! Line-delimited episode logs: one JSON record per episode, with
//! optional per-step traces behind `--full-trace`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use netdef_core::adversaries::RedAgentKind;
use netdef_core::eval::{EpisodeRecord, Scenario};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: invalid record: {source}")]
    Parse {
        path: String,
        line: usize,
        source: serde_json::Error,
    },
    #[error("no episode with seed {seed}{filter} in {path}")]
    SeedNotFound {
        path: String,
        seed: u64,
        filter: String,
    },
    #[error("episode with seed {seed} has no step trace; re-run evaluate with --full-trace")]
    NoTrace { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepEntry {
    pub step: u32,
    pub red: String,
    pub blue: String,
    pub reward: f64,
    /// 52-bit observation after the step, as a 0/1 string.
    pub obs: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeEntry {
    pub adversary: String,
    pub horizon: u32,
    pub seed: u64,
    pub score: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<Vec<StepEntry>>,
}

impl EpisodeEntry {
    pub fn from_record(scenario: &Scenario, record: &EpisodeRecord, full_trace: bool) -> Self {
        let steps = full_trace.then(|| {
            record
                .steps
                .iter()
                .map(|s| StepEntry {
                    step: s.step,
                    red: s.red.to_string(),
                    blue: s.blue.to_string(),
                    reward: s.reward,
                    obs: s.obs.to_bit_string(),
                })
                .collect()
        });
        EpisodeEntry {
            adversary: scenario.adversary.name().to_string(),
            horizon: scenario.horizon,
            seed: record.seed,
            score: record.score,
            steps,
        }
    }
}

pub struct LogWriter {
    path: String,
    out: BufWriter<File>,
}

impl LogWriter {
    pub fn create(path: &Path) -> Result<LogWriter, LogError> {
        let file = File::create(path).map_err(|source| LogError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(LogWriter {
            path: path.display().to_string(),
            out: BufWriter::new(file),
        })
    }

    pub fn write(&mut self, entry: &EpisodeEntry) -> Result<(), LogError> {
        let io_err = |source| LogError::Io {
            path: self.path.clone(),
            source,
        };
        let line = serde_json::to_string(entry).expect("episode entry serializes");
        self.out.write_all(line.as_bytes()).map_err(io_err)?;
        self.out.write_all(b"\n").map_err(io_err)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), LogError> {
        self.out.flush().map_err(|source| LogError::Io {
            path: self.path.clone(),
            source,
        })
    }
}

pub fn read_log(path: &Path) -> Result<Vec<EpisodeEntry>, LogError> {
    let file = File::open(path).map_err(|source| LogError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut entries = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| LogError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(&line).map_err(|source| LogError::Parse {
            path: path.display().to_string(),
            line: lineno + 1,
            source,
        })?;
        entries.push(entry);
    }
    Ok(entries)
}

/// Find one episode by seed, optionally narrowed to an adversary when
/// several scenarios share the seed range.
pub fn find_episode<'a>(
    entries: &'a [EpisodeEntry],
    path: &Path,
    seed: u64,
    adversary: Option<RedAgentKind>,
) -> Result<&'a EpisodeEntry, LogError> {
    entries
        .iter()
        .find(|e| {
            e.seed == seed
                && adversary.is_none_or(|kind| e.adversary == kind.name())
        })
        .ok_or_else(|| LogError::SeedNotFound {
            path: path.display().to_string(),
            seed,
            filter: adversary
                .map(|k| format!(" (adversary {})", k.name()))
                .unwrap_or_default(),
        })
}
