//! Flat `section.key = value` run configuration.
//!
//! Files are line-oriented: blank lines and `#` comments are ignored,
//! everything else must be `dotted.key = value`. Unknown keys are
//! rejected outright so a typo can never silently fall back to a
//! default. CLI `--set key=value` overrides apply on top of the file.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use netdef_core::icm::IcmHyper;
use netdef_core::netsim::SimConfig;
use netdef_core::ppo::PpoHyper;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{file}:{line}: expected `key = value`, got `{text}`")]
    Malformed {
        file: String,
        line: usize,
        text: String,
    },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config key `{key}`: cannot parse `{value}` as {expected}")]
    BadValue {
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Everything a run needs beyond its seed (seeds come from the CLI or
/// the `NETDEF_SEED` environment variable).
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub sim: SimConfig,
    pub ppo: PpoHyper,
    pub icm: IcmHyper,
    /// Environment-step budget for each specialist.
    pub sub_budget: usize,
    /// Environment-step budget for the controller.
    pub controller_budget: usize,
    /// Episodes per evaluation scenario.
    pub episodes: usize,
    /// Base seed for evaluation episodes (episode i uses base_seed + i).
    pub base_seed: u64,
    /// Parallel evaluation workers.
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        // The training defaults differ from `PpoHyper::default()`: with
        // plain SGD this environment needs large rollout batches, a hot
        // actor step and a damped critic step to escape the local
        // optimum of spamming Restore on the operational server.
        let ppo = PpoHyper {
            lr: 1e-2,
            epochs: 10,
            minibatch: 64,
            entropy_coef: 0.005,
            value_coef: 0.02,
            ..PpoHyper::default()
        };
        RunConfig {
            sim: SimConfig::default(),
            ppo,
            icm: IcmHyper::default(),
            sub_budget: 2_000_000,
            controller_budget: 1_000_000,
            episodes: 1000,
            base_seed: 0,
            workers: 1,
        }
    }
}

fn parse<T: std::str::FromStr>(
    key: &str,
    value: &str,
    expected: &'static str,
) -> Result<T, ConfigError> {
    value.trim().parse().map_err(|_| ConfigError::BadValue {
        key: key.to_string(),
        value: value.trim().to_string(),
        expected,
    })
}

impl RunConfig {
    /// Apply one `dotted.key = value` assignment. Fail-closed: unknown
    /// keys are an error, never ignored.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let key = key.trim();
        match key {
            "sim.p_exploit_success" => self.sim.p_exploit_success = parse(key, value, "a probability")?,
            "sim.p_restore_fail" => self.sim.p_restore_fail = parse(key, value, "a probability")?,
            "sim.p_detect_exploit" => self.sim.p_detect_exploit = parse(key, value, "a probability")?,
            "sim.p_detect_scan" => self.sim.p_detect_scan = parse(key, value, "a probability")?,
            "sim.horizon" => self.sim.horizon = parse(key, value, "a step count")?,
            "ppo.gamma" => self.ppo.gamma = parse(key, value, "a real")?,
            "ppo.lam" => self.ppo.lam = parse(key, value, "a real")?,
            "ppo.clip_eps" => self.ppo.clip_eps = parse(key, value, "a real")?,
            "ppo.lr" => self.ppo.lr = parse(key, value, "a real")?,
            "ppo.epochs" => self.ppo.epochs = parse(key, value, "an integer")?,
            "ppo.minibatch" => self.ppo.minibatch = parse(key, value, "an integer")?,
            "ppo.entropy_coef" => self.ppo.entropy_coef = parse(key, value, "a real")?,
            "ppo.value_coef" => self.ppo.value_coef = parse(key, value, "a real")?,
            "icm.feature_dim" => self.icm.feature_dim = parse(key, value, "an integer")?,
            "icm.eta" => self.icm.eta = parse(key, value, "a real")?,
            "icm.beta" => self.icm.beta = parse(key, value, "a real")?,
            "icm.lr" => self.icm.lr = parse(key, value, "a real")?,
            "train.sub_budget" => self.sub_budget = parse(key, value, "an integer")?,
            "train.controller_budget" => self.controller_budget = parse(key, value, "an integer")?,
            "eval.episodes" => self.episodes = parse(key, value, "an integer")?,
            "eval.base_seed" => self.base_seed = parse(key, value, "an integer")?,
            "eval.workers" => self.workers = parse(key, value, "an integer")?,
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Parse a config file's contents. `file` is only used in messages.
    pub fn apply_text(&mut self, text: &str, file: &str) -> Result<(), ConfigError> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Malformed {
                    file: file.to_string(),
                    line: lineno + 1,
                    text: line.to_string(),
                });
            };
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut config = RunConfig::default();
        config.apply_text(&text, &path.display().to_string())?;
        Ok(config)
    }

    /// Apply CLI `key=value` overrides on top of file values.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<(), ConfigError> {
        for item in overrides {
            let Some((key, value)) = item.split_once('=') else {
                return Err(ConfigError::Malformed {
                    file: "--set".to_string(),
                    line: 0,
                    text: item.clone(),
                });
            };
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.sim
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.workers == 0 {
            return Err(ConfigError::Invalid("eval.workers must be at least 1".into()));
        }
        if self.episodes == 0 {
            return Err(ConfigError::Invalid("eval.episodes must be at least 1".into()));
        }
        Ok(())
    }

    /// Canonical text form: every key, sorted, one per line. This is
    /// what the manifest hash covers, so two configs hash equal exactly
    /// when every effective value matches.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line("eval.base_seed", self.base_seed.to_string());
        line("eval.episodes", self.episodes.to_string());
        line("eval.workers", self.workers.to_string());
        line("icm.beta", format!("{:?}", self.icm.beta));
        line("icm.eta", format!("{:?}", self.icm.eta));
        line("icm.feature_dim", self.icm.feature_dim.to_string());
        line("icm.lr", format!("{:?}", self.icm.lr));
        line("ppo.clip_eps", format!("{:?}", self.ppo.clip_eps));
        line("ppo.entropy_coef", format!("{:?}", self.ppo.entropy_coef));
        line("ppo.epochs", self.ppo.epochs.to_string());
        line("ppo.gamma", format!("{:?}", self.ppo.gamma));
        line("ppo.lam", format!("{:?}", self.ppo.lam));
        line("ppo.lr", format!("{:?}", self.ppo.lr));
        line("ppo.minibatch", self.ppo.minibatch.to_string());
        line("ppo.value_coef", format!("{:?}", self.ppo.value_coef));
        line("sim.horizon", self.sim.horizon.to_string());
        line("sim.p_detect_exploit", format!("{:?}", self.sim.p_detect_exploit));
        line("sim.p_detect_scan", format!("{:?}", self.sim.p_detect_scan));
        line("sim.p_exploit_success", format!("{:?}", self.sim.p_exploit_success));
        line("sim.p_restore_fail", format!("{:?}", self.sim.p_restore_fail));
        line("train.controller_budget", self.controller_budget.to_string());
        line("train.sub_budget", self.sub_budget.to_string());
        out
    }

    /// FNV-1a over the canonical form; stable across runs and Rust
    /// versions, unlike the stdlib's default hasher.
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for byte in self.canonical().bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }
}
