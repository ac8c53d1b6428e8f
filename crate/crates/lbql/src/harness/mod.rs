//! Experiment orchestration: seeded multi-run training with per-step
//! metrics, greedy-policy evaluation, first-crossing threshold reports, and
//! hyperparameter sweeps. Seeds run concurrently; results depend only on
//! `(config, seed)`.

mod config;
mod csv;

pub use config::{default_hyperparams, EvalSettings, HyperOverrides, RunConfig};
pub use csv::{
    q_table_csv, sweep_csv_text, write_aggregate_csv, write_perf_csv, write_run_csvs,
    write_sweep_csv, RUN_HEADER,
};

use crate::agents::{self, AgentError, Schedule};
use crate::dp::{self, DpError};
use crate::envs::{self, UnknownEnv};
use crate::mdp::{ActionId, Mdp, QTable, StateId, ValueTable};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::sync::Arc;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unsupported metric: {0}")]
    UnsupportedMetric(String),
    #[error(transparent)]
    Dp(DpError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<UnknownEnv> for HarnessError {
    fn from(e: UnknownEnv) -> Self {
        HarnessError::Config(e.to_string())
    }
}

impl From<AgentError> for HarnessError {
    fn from(e: AgentError) -> Self {
        HarnessError::Config(e.to_string())
    }
}

impl From<DpError> for HarnessError {
    fn from(e: DpError) -> Self {
        match e {
            DpError::UnsupportedModel(m) => HarnessError::UnsupportedMetric(format!(
                "relative error needs the exact optimum, unavailable for '{m}'"
            )),
            other => HarnessError::Dp(other),
        }
    }
}

/// Per-step measurements for one seed. Vectors are step-indexed (entry i is
/// step i + 1); optional metrics stay `None` when disabled.
pub struct SeedLog {
    pub seed: u64,
    pub rewards: Vec<f64>,
    pub rel_errors: Option<Vec<f64>>,
    pub bound_gaps: Option<Vec<f64>>,
    pub bounds_updated: Vec<bool>,
    pub wall_ms: Option<Vec<f64>>,
    /// `(step, training reward over the trailing 500 steps, greedy return)`.
    pub evals: Vec<(u64, f64, f64)>,
    pub bound_violations: u64,
    pub truncated_paths: u64,
}

pub struct RunOutcome {
    pub config: RunConfig,
    pub logs: Vec<SeedLog>,
    pub v_star: Option<ValueTable>,
}

/// Decides whether the relative-error metric is on, resolving `None` to
/// "when the optimum is computable".
fn rel_error_enabled(config: &RunConfig, model: &dyn Mdp) -> Result<bool, HarnessError> {
    match config.relative_error {
        Some(false) => Ok(false),
        Some(true) => {
            if model.noise_support().is_none() {
                Err(HarnessError::UnsupportedMetric(format!(
                    "relative error requested but no exact optimum exists for '{}'",
                    model.name()
                )))
            } else {
                Ok(true)
            }
        }
        None => Ok(model.noise_support().is_some()),
    }
}

/// Trains `config.agent` on `config.env` for every seed and records
/// per-step metrics. `q_star` short-circuits the oracle solve (e.g. a table
/// loaded from a cache file).
pub fn run(config: &RunConfig) -> Result<RunOutcome, HarnessError> {
    run_with_reference(config, None)
}

pub fn run_with_reference(
    config: &RunConfig,
    q_star: Option<QTable>,
) -> Result<RunOutcome, HarnessError> {
    let model = envs::by_name_with(&config.env, config.gamma)?;
    if config.seeds.is_empty() {
        return Err(HarnessError::Config("at least one seed is required".into()));
    }
    let want_rel = rel_error_enabled(config, model.as_ref())?;
    let mut v_star = if want_rel {
        let q = match q_star {
            Some(q) => q,
            None => dp::q_value_iteration(model.as_ref(), dp::DEFAULT_TOL, dp::DEFAULT_MAX_ITERS)?,
        };
        Some(dp::greedy_value(&q, model.as_ref()))
    } else {
        None
    };
    // a zero-norm reference leaves the ratio undefined
    if v_star.as_ref().is_some_and(|v| v.l2_norm() == 0.0) {
        if config.relative_error == Some(true) {
            return Err(HarnessError::UnsupportedMetric(format!(
                "the optimal value function of '{}' has zero norm",
                model.name()
            )));
        }
        v_star = None;
    }

    let hp = config.resolved_hyperparams();
    let logs: Result<Vec<SeedLog>, HarnessError> = config
        .seeds
        .par_iter()
        .map(|&seed| run_seed(config, Arc::clone(&model), hp, v_star.as_ref(), seed))
        .collect();
    Ok(RunOutcome {
        config: config.clone(),
        logs: logs?,
        v_star,
    })
}

fn run_seed(
    config: &RunConfig,
    model: Arc<dyn Mdp>,
    hp: agents::Hyperparams,
    v_star: Option<&ValueTable>,
    seed: u64,
) -> Result<SeedLog, HarnessError> {
    let mut agent = agents::by_name(&config.agent, Arc::clone(&model), hp, seed)?;
    let steps = config.steps as usize;
    let mut log = SeedLog {
        seed,
        rewards: Vec::with_capacity(steps),
        rel_errors: v_star.map(|_| Vec::with_capacity(steps)),
        bound_gaps: None,
        bounds_updated: Vec::with_capacity(steps),
        wall_ms: config.record_wall_time.then(|| Vec::with_capacity(steps)),
        evals: Vec::new(),
        bound_violations: 0,
        truncated_paths: 0,
    };
    let mut eval_rng = ChaCha8Rng::seed_from_u64(seed);
    eval_rng.set_stream(100);
    let mut elapsed_ms = 0.0f64;

    for step in 1..=config.steps {
        let t0 = config.record_wall_time.then(Instant::now);
        let out = agent.step();
        if let Some(t0) = t0 {
            elapsed_ms += t0.elapsed().as_secs_f64() * 1e3;
        }
        log.rewards.push(out.reward);
        log.bounds_updated.push(out.bounds_updated);
        if let Some(wall) = log.wall_ms.as_mut() {
            wall.push(elapsed_ms);
        }
        if let Some(rel) = log.rel_errors.as_mut() {
            let v = v_star.expect("rel_errors implies v_star");
            rel.push(dp::relative_error(
                agent.eval_q().as_ref(),
                v,
                model.as_ref(),
            )?);
        }
        if let Some(gap) = agent.mean_bound_gap() {
            log.bound_gaps.get_or_insert_with(Vec::new).push(gap);
        }
        if config.eval.enabled && step % config.eval.period == 0 {
            let window = log.rewards.len().min(500);
            let ma: f64 = log.rewards[log.rewards.len() - window..]
                .iter()
                .sum::<f64>()
                / window as f64;
            let greedy = eval_performance(
                model.as_ref(),
                agent.eval_q().as_ref(),
                config.eval.episodes,
                config.eval.horizon,
                &mut eval_rng,
            )?;
            log.evals.push((step, ma, greedy));
        }
    }
    log.bound_violations = agent.bound_violations();
    log.truncated_paths = agent.truncated_paths();
    Ok(log)
}

/// Mean undiscounted return of the greedy policy of `q` over full episodes.
/// Episodic models start at the environment start state; continuing models
/// start from uniformly drawn states. Episodes end at a terminal state or
/// after `horizon` steps.
pub fn eval_performance(
    model: &dyn Mdp,
    q: &QTable,
    episodes: usize,
    horizon: usize,
    rng: &mut dyn RngCore,
) -> Result<f64, HarnessError> {
    if episodes == 0 {
        return Err(HarnessError::Config(
            "evaluation needs at least one episode".into(),
        ));
    }
    let policy = dp::greedy_policy(q, model);
    let episodic = model.has_terminal();
    let mut total = 0.0;
    for _ in 0..episodes {
        let mut s = if episodic {
            model.start_state()
        } else {
            StateId((rng.next_u64() % model.state_count() as u64) as usize)
        };
        for _ in 0..horizon {
            if model.is_terminal(s) {
                break;
            }
            let a = policy[s.0];
            let w = model.sample_noise(rng);
            total += model.realized_reward(s, a, w);
            s = model.next_state(s, a, w);
        }
    }
    Ok(total / episodes as f64)
}

/// First-crossing summary for one threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdEntry {
    pub threshold: f64,
    /// Mean first step with relative error at or below the threshold;
    /// `None` when any seed never crossed.
    pub steps: Option<f64>,
    /// Mean wall-clock seconds at the crossing, when timing was recorded.
    pub seconds: Option<f64>,
}

pub const DEFAULT_THRESHOLDS: [f64; 4] = [0.5, 0.2, 0.05, 0.01];

/// Per-threshold mean first-crossing step (and time) across seeds.
pub fn time_to_thresholds(
    logs: &[SeedLog],
    thresholds: &[f64],
) -> Result<Vec<ThresholdEntry>, HarnessError> {
    if logs.iter().any(|l| l.rel_errors.is_none()) {
        return Err(HarnessError::UnsupportedMetric(
            "threshold report needs the relative-error column".into(),
        ));
    }
    let mut entries = Vec::with_capacity(thresholds.len());
    for &threshold in thresholds {
        let mut step_sum = 0.0;
        let mut sec_sum = 0.0;
        let mut have_secs = true;
        let mut all_reached = true;
        for log in logs {
            let errs = log.rel_errors.as_ref().unwrap();
            match errs.iter().position(|&e| e <= threshold) {
                Some(idx) => {
                    step_sum += (idx + 1) as f64;
                    match log.wall_ms.as_ref() {
                        Some(wall) => sec_sum += wall[idx] / 1e3,
                        None => have_secs = false,
                    }
                }
                None => {
                    all_reached = false;
                    break;
                }
            }
        }
        let n = logs.len() as f64;
        entries.push(ThresholdEntry {
            threshold,
            steps: all_reached.then_some(step_sum / n),
            seconds: (all_reached && have_secs).then_some(sec_sum / n),
        });
    }
    Ok(entries)
}

/// One sweep cell: an agent at one `(e, r)` schedule setting.
pub struct SweepRow {
    pub agent: String,
    pub explore_exponent: f64,
    pub learn_exponent: f64,
    pub entries: Vec<ThresholdEntry>,
}

/// Full cross product of agents x exploration exponents x learning-rate
/// exponents, each trained with the base config's seeds and summarized by
/// first-crossing thresholds.
pub fn sweep(
    base: &RunConfig,
    agents_list: &[&str],
    e_grid: &[f64],
    r_grid: &[f64],
    thresholds: &[f64],
) -> Result<Vec<SweepRow>, HarnessError> {
    if agents_list.is_empty() || e_grid.is_empty() || r_grid.is_empty() {
        return Err(HarnessError::Config("sweep grid must be non-empty".into()));
    }
    // solve the oracle once for the whole sweep
    let model = envs::by_name_with(&base.env, base.gamma)?;
    let q_star = dp::q_value_iteration(model.as_ref(), dp::DEFAULT_TOL, dp::DEFAULT_MAX_ITERS)?;

    let mut rows = Vec::new();
    for agent in agents_list {
        for &e in e_grid {
            for &r in r_grid {
                let mut config = base.clone().with_agent(agent);
                config.hyperparams.exploration = Some(Schedule::Polynomial { exponent: e });
                config.hyperparams.learning = Some(Schedule::Polynomial { exponent: r });
                let outcome = run_with_reference(&config, Some(q_star.clone()))?;
                rows.push(SweepRow {
                    agent: agent.to_string(),
                    explore_exponent: e,
                    learn_exponent: r,
                    entries: time_to_thresholds(&outcome.logs, thresholds)?,
                });
            }
        }
    }
    Ok(rows)
}

/// Loads a Q table from the `state,action,q` CSV written by the solve
/// command.
pub fn load_q_csv(path: &std::path::Path, model: &dyn Mdp) -> Result<QTable, HarnessError> {
    let text = std::fs::read_to_string(path)?;
    let mut q = QTable::for_model(model, 0.0);
    let mut filled = 0usize;
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line != "state,action,q" {
                return Err(HarnessError::Config(format!(
                    "unexpected header in {}: {line}",
                    path.display()
                )));
            }
            continue;
        }
        let mut parts = line.split(',');
        let mut field = || {
            parts
                .next()
                .ok_or_else(|| HarnessError::Config(format!("short row in {}", path.display())))
        };
        let s: usize = field()?
            .parse()
            .map_err(|e| HarnessError::Config(format!("bad state index: {e}")))?;
        let a: usize = field()?
            .parse()
            .map_err(|e| HarnessError::Config(format!("bad action index: {e}")))?;
        let v: f64 = field()?
            .parse()
            .map_err(|e| HarnessError::Config(format!("bad value: {e}")))?;
        if s >= model.state_count() || a >= model.action_count() {
            return Err(HarnessError::Config(format!(
                "entry ({s}, {a}) out of range for '{}'",
                model.name()
            )));
        }
        q.set(StateId(s), ActionId(a), v);
        filled += 1;
    }
    if filled != model.pair_count() {
        return Err(HarnessError::Config(format!(
            "expected {} entries, found {filled}",
            model.pair_count()
        )));
    }
    Ok(q)
}
