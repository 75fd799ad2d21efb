//! The run config file: one JSON document with `pac`, `tree`, `env`, `run`
//! and `nuse` sections. Every field is optional and unknown fields are
//! rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bandits::{Mode, PacConfig};
use crate::env::{BoxWorldConfig, SyntheticWorldConfig};
use crate::itrs::RunConfig;
use crate::tree::TrainConfig;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub pac: PacSection,
    pub tree: TrainConfig,
    pub env: EnvSection,
    pub run: RunSection,
    pub nuse: NuseSection,
}

/// The arm count is not configurable; it is the environment's action count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PacSection {
    pub epsilon: f64,
    pub delta: f64,
}

impl Default for PacSection {
    fn default() -> Self {
        Self {
            epsilon: 0.45,
            delta: 0.45,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvSection {
    Synthetic(SyntheticWorldConfig),
    BoxWorld(BoxWorldConfig),
}

impl Default for EnvSection {
    fn default() -> Self {
        EnvSection::Synthetic(SyntheticWorldConfig::default())
    }
}

impl EnvSection {
    pub fn n_actions(&self) -> usize {
        match self {
            EnvSection::Synthetic(c) => c.n_actions,
            EnvSection::BoxWorld(c) => c.columns + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub max_iterations: u64,
    pub budget: Option<u64>,
    pub categories: usize,
    pub bootstrap_states: usize,
    pub retrain_every: u64,
    pub eval_every: u64,
    pub eval_states: usize,
    /// Only read by `baseline random`.
    pub reject_fraction: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        let d = RunConfig::new(PacConfig::new(1, 0.5, 0.5).expect("valid"));
        Self {
            seed: d.seed,
            max_iterations: d.max_iterations,
            budget: d.budget,
            categories: d.categories,
            bootstrap_states: d.bootstrap_states,
            retrain_every: d.retrain_every,
            eval_every: d.eval_every,
            eval_states: d.eval_states,
            reject_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NuseMode {
    ZeroDelta,
    #[default]
    EpsDelta,
}

impl From<NuseMode> for Mode {
    fn from(m: NuseMode) -> Self {
        match m {
            NuseMode::ZeroDelta => Mode::ZeroDelta,
            NuseMode::EpsDelta => Mode::EpsDelta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NuseSection {
    pub mode: NuseMode,
    /// Sample cap; defaults to ten times the naive total `n·τ`.
    pub max_samples: Option<u64>,
}

/// A config problem, already formatted with its location.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// 1-based line of the first occurrence of `"key"` in the document.
fn key_line(text: &str, key: &str) -> Option<usize> {
    let quoted = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&quoted)).map(|i| i + 1)
}

fn field_error(path: &Path, text: &str, field: &str, message: impl std::fmt::Display) -> ConfigError {
    let key = field.rsplit('.').next().unwrap_or(field);
    match key_line(text, key) {
        Some(line) => ConfigError(format!("{}:{line}: {field}: {message}", path.display())),
        None => ConfigError(format!("{}: {field}: {message}", path.display())),
    }
}

impl Config {
    pub fn parse(path: &Path, text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = serde_json::from_str(text)
            .map_err(|e| ConfigError(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column())))?;
        cfg.validate(path, text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("{}: cannot read config: {e}", path.display())))?;
        Self::parse(path, &text)
    }

    fn validate(&self, path: &Path, text: &str) -> Result<(), ConfigError> {
        let err = |field: &str, msg: String| Err(field_error(path, text, field, msg));
        let p = self.pac;
        if !(p.epsilon > 0.0 && p.epsilon <= 1.0) {
            return err("pac.epsilon", format!("must lie in (0, 1], got {}", p.epsilon));
        }
        if !(p.delta > 0.0 && p.delta < 1.0) {
            return err("pac.delta", format!("must lie in (0, 1), got {}", p.delta));
        }
        if !(self.tree.lambda.is_finite() && self.tree.lambda >= 0.0) {
            return err("tree.lambda", format!("must be finite and non-negative, got {}", self.tree.lambda));
        }
        match &self.env {
            EnvSection::Synthetic(c) => {
                if c.n_actions == 0 {
                    return err("env.n_actions", "must be at least 1".into());
                }
                if c.n_partitions == 0 {
                    return err("env.n_partitions", "must be at least 1".into());
                }
                if !(0.0..=1.0).contains(&c.best_mean) {
                    return err("env.best_mean", format!("must lie in [0, 1], got {}", c.best_mean));
                }
                if !(c.gap >= 0.0 && c.best_mean - c.gap >= 0.0) {
                    return err("env.gap", format!("must lie in [0, best_mean], got {}", c.gap));
                }
                if !(c.sigma >= 0.0) {
                    return err("env.sigma", format!("must be non-negative, got {}", c.sigma));
                }
            }
            EnvSection::BoxWorld(c) => {
                if c.columns == 0 || c.rows == 0 {
                    return err("env.columns", "columns and rows must be at least 1".into());
                }
                if !(0.0..=1.0).contains(&c.fail_prob) {
                    return err("env.fail_prob", format!("must lie in [0, 1], got {}", c.fail_prob));
                }
            }
        }
        let r = &self.run;
        if !r.categories.is_power_of_two() || r.categories < 2 {
            return err("run.categories", format!("must be a power of two, at least 2, got {}", r.categories));
        }
        for (field, v) in [
            ("run.max_iterations", r.max_iterations),
            ("run.bootstrap_states", r.bootstrap_states as u64),
            ("run.retrain_every", r.retrain_every),
            ("run.eval_every", r.eval_every),
            ("run.eval_states", r.eval_states as u64),
        ] {
            if v == 0 {
                return err(field, "must be at least 1".into());
            }
        }
        if !(0.0..=1.0).contains(&r.reject_fraction) {
            return err("run.reject_fraction", format!("must lie in [0, 1], got {}", r.reject_fraction));
        }
        Ok(())
    }

    pub fn pac_config(&self) -> PacConfig {
        PacConfig::new(self.env.n_actions(), self.pac.epsilon, self.pac.delta).expect("validated")
    }

    pub fn run_config(&self) -> RunConfig {
        let r = &self.run;
        RunConfig {
            pac: self.pac_config(),
            tree: self.tree,
            max_iterations: r.max_iterations,
            budget: r.budget,
            seed: r.seed,
            categories: r.categories,
            bootstrap_states: r.bootstrap_states,
            retrain_every: r.retrain_every,
            eval_every: r.eval_every,
            eval_states: r.eval_states,
        }
    }
}
