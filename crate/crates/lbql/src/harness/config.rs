//! Experiment configuration: per-environment defaults, JSON config files
//! (unknown keys rejected), and override merging. CLI flags take precedence
//! over file values, which take precedence over the environment defaults.

use crate::agents::{Hyperparams, InitMode, Schedule};
use serde::{Deserialize, Serialize};
use std::path::Path;

use super::HarnessError;

/// Bound-algorithm defaults per environment: stepsize beta, buffer size
/// kappa, batch size K, update period m, gap threshold delta, plus the
/// shared schedule exponents and init mode.
pub fn default_hyperparams(env: &str) -> Hyperparams {
    let poly = |e: f64| Schedule::Polynomial { exponent: e };
    let base = Hyperparams {
        learning: poly(0.5),
        exploration: poly(0.5),
        ..Hyperparams::default()
    };
    match env {
        "2-cs-r" => Hyperparams {
            beta: Schedule::Constant { value: 0.01 },
            buffer_capacity: 40,
            batch_size: 20,
            update_period: 10,
            gap_threshold: 0.01,
            ..base
        },
        "2-cs" => Hyperparams {
            beta: Schedule::Constant { value: 0.01 },
            buffer_capacity: 40,
            batch_size: 20,
            update_period: 15,
            gap_threshold: 0.01,
            ..base
        },
        "4-cs" => Hyperparams {
            beta: Schedule::Constant { value: 0.01 },
            buffer_capacity: 1000,
            batch_size: 20,
            update_period: 200,
            gap_threshold: 0.01,
            exploration: poly(0.4),
            ..base
        },
        "wg" => Hyperparams {
            beta: Schedule::Constant { value: 0.2 },
            buffer_capacity: 100,
            batch_size: 10,
            update_period: 10,
            gap_threshold: 0.01,
            ..base
        },
        "sg" => Hyperparams {
            beta: Schedule::Constant { value: 0.2 },
            buffer_capacity: 500,
            batch_size: 20,
            update_period: 20,
            gap_threshold: 0.05,
            init: InitMode::Zero,
            ..base
        },
        // the two-state example trains with small constant stepsizes
        "example1" => Hyperparams {
            learning: Schedule::Constant { value: 0.1 },
            beta: Schedule::Constant { value: 0.05 },
            batch_size: 20,
            buffer_capacity: 40,
            update_period: 1,
            gap_threshold: 0.01,
            init: InitMode::Zero,
            ..base
        },
        _ => base,
    }
}

/// Optional per-field hyperparameter overrides (JSON-friendly).
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct HyperOverrides {
    pub learning: Option<Schedule>,
    pub exploration: Option<Schedule>,
    pub beta: Option<Schedule>,
    pub batch_size: Option<usize>,
    pub buffer_capacity: Option<usize>,
    pub update_period: Option<usize>,
    pub gap_threshold: Option<f64>,
    pub init: Option<InitMode>,
    pub horizon_cap: Option<usize>,
    pub project_all_pairs: Option<bool>,
}

impl HyperOverrides {
    pub fn apply(&self, mut hp: Hyperparams) -> Hyperparams {
        if let Some(v) = self.learning {
            hp.learning = v;
        }
        if let Some(v) = self.exploration {
            hp.exploration = v;
        }
        if let Some(v) = self.beta {
            hp.beta = v;
        }
        if let Some(v) = self.batch_size {
            hp.batch_size = v;
        }
        if let Some(v) = self.buffer_capacity {
            hp.buffer_capacity = v;
        }
        if let Some(v) = self.update_period {
            hp.update_period = v;
        }
        if let Some(v) = self.gap_threshold {
            hp.gap_threshold = v;
        }
        if let Some(v) = self.init {
            hp.init = v;
        }
        if let Some(v) = self.horizon_cap {
            hp.horizon_cap = v;
        }
        if let Some(v) = self.project_all_pairs {
            hp.project_all_pairs = v;
        }
        hp
    }

    pub fn merge_over(&self, base: &HyperOverrides) -> HyperOverrides {
        HyperOverrides {
            learning: self.learning.or(base.learning),
            exploration: self.exploration.or(base.exploration),
            beta: self.beta.or(base.beta),
            batch_size: self.batch_size.or(base.batch_size),
            buffer_capacity: self.buffer_capacity.or(base.buffer_capacity),
            update_period: self.update_period.or(base.update_period),
            gap_threshold: self.gap_threshold.or(base.gap_threshold),
            init: self.init.or(base.init),
            horizon_cap: self.horizon_cap.or(base.horizon_cap),
            project_all_pairs: self.project_all_pairs.or(base.project_all_pairs),
        }
    }
}

/// Periodic greedy-policy evaluation settings.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSettings {
    pub enabled: bool,
    /// Steps between evaluations.
    pub period: u64,
    pub episodes: usize,
    /// Rollout length cap per episode.
    pub horizon: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            enabled: false,
            period: 1000,
            episodes: 20,
            horizon: 200,
        }
    }
}

/// One experiment: environment, agent, step budget, seeds, and knobs.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub env: String,
    #[serde(default = "default_agent")]
    pub agent: String,
    #[serde(default = "default_steps")]
    pub steps: u64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Discount override; `None` keeps the environment's default.
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub hyperparams: HyperOverrides,
    #[serde(default)]
    pub eval: EvalSettings,
    /// `None` enables the relative-error metric exactly when the exact
    /// optimum is computable (or supplied); `Some(true)` demands it.
    #[serde(default)]
    pub relative_error: Option<bool>,
    /// Record per-step wall-clock time. Off by default so identical runs
    /// produce byte-identical CSVs.
    #[serde(default)]
    pub record_wall_time: bool,
}

fn default_agent() -> String {
    "lbql".to_string()
}

fn default_steps() -> u64 {
    50_000
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2, 3, 4]
}

impl RunConfig {
    pub fn new(env: &str) -> Self {
        RunConfig {
            env: env.to_string(),
            agent: default_agent(),
            steps: default_steps(),
            seeds: default_seeds(),
            gamma: None,
            hyperparams: HyperOverrides::default(),
            eval: EvalSettings::default(),
            relative_error: None,
            record_wall_time: false,
        }
    }

    pub fn with_agent(mut self, agent: &str) -> Self {
        self.agent = agent.to_string();
        self
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    /// Environment defaults with this config's overrides applied.
    pub fn resolved_hyperparams(&self) -> Hyperparams {
        self.hyperparams.apply(default_hyperparams(&self.env))
    }
}
