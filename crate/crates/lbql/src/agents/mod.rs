//! Learning algorithms over a shared step interface: the bounded Q-learner
//! in three variants (`lbql`, `lbql-ideal`, `lbql-exact`) and four baselines
//! (`ql`, `double-ql`, `sql`, `bcql`).
//!
//! All agents share the polynomial schedules `alpha = 1/nu(s,a)^r` and
//! `epsilon = 1/nu(s)^e` (or constants when configured), epsilon-greedy
//! action selection with lowest-index tie-breaks, and episodic resets:
//! whenever the current state is terminal the agent teleports to the
//! environment's start state before acting.
//!
//! Randomness is split into named ChaCha streams per run — 0: table init,
//! 1: action draws, 2: environment noise, 3: bound-phase draws, 4: the
//! double-Q coin — so paired runs of different agents see identical action
//! and environment randomness.

mod baselines;
mod lbql;

pub use baselines::{BcqlAgent, DoubleCoin, DoubleQlAgent, QlAgent, SpeedyQlAgent};
pub use lbql::{LbqlAgent, LbqlVariant};

use crate::mdp::{
    exploration_rate, learning_rate, uniform_unit, ActionId, Mdp, QTable, StateId, VisitCounts,
};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::borrow::Cow;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("unknown agent '{0}' (expected one of: lbql, lbql-ideal, lbql-exact, ql, double-ql, sql, bcql)")]
    UnknownAgent(String),
    #[error("invalid hyperparameters: {0}")]
    InvalidConfig(String),
}

pub const AGENT_NAMES: [&str; 7] = [
    "lbql",
    "lbql-ideal",
    "lbql-exact",
    "ql",
    "double-ql",
    "sql",
    "bcql",
];

/// A stepsize rule: polynomial in the visit count, or a constant.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    Polynomial { exponent: f64 },
    Constant { value: f64 },
}

impl Schedule {
    pub fn rate(&self, visits: u64) -> f64 {
        match self {
            Schedule::Polynomial { exponent } => learning_rate(visits, *exponent),
            Schedule::Constant { value } => *value,
        }
    }

    fn validate(&self, name: &str) -> Result<(), AgentError> {
        let ok = match self {
            Schedule::Polynomial { exponent } => exponent.is_finite() && *exponent >= 0.0,
            Schedule::Constant { value } => value.is_finite() && *value > 0.0 && *value <= 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(AgentError::InvalidConfig(format!(
                "bad {name} schedule: {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// Q entries uniform on [-rho, rho]; terminal rows pinned at zero.
    Random,
    /// All-zero tables.
    Zero,
}

/// Agent hyperparameters. The bound-specific fields (`batch_size`,
/// `buffer_capacity`, `update_period`, `gap_threshold`, `beta`) are ignored
/// by the baselines, except that `bcql` ties its correction constant to
/// `batch_size`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Q-update stepsize (alpha).
    pub learning: Schedule,
    /// Exploration rate (epsilon).
    pub exploration: Schedule,
    /// Bound-update stepsize (beta).
    pub beta: Schedule,
    /// Batch size K for penalty expectations.
    pub batch_size: usize,
    /// Noise buffer capacity kappa.
    pub buffer_capacity: usize,
    /// Steps between bound updates m.
    pub update_period: usize,
    /// Minimum bound gap delta that triggers an update.
    pub gap_threshold: f64,
    pub init: InitMode,
    /// Truncation cap for geometric horizons.
    pub horizon_cap: usize,
    /// Ablation: re-project every pair (not just the visited one) after a
    /// bound update.
    pub project_all_pairs: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            learning: Schedule::Polynomial { exponent: 0.5 },
            exploration: Schedule::Polynomial { exponent: 0.5 },
            beta: Schedule::Constant { value: 0.01 },
            batch_size: 20,
            buffer_capacity: 40,
            update_period: 15,
            gap_threshold: 0.01,
            init: InitMode::Random,
            horizon_cap: 10_000,
            project_all_pairs: false,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), AgentError> {
        self.learning.validate("learning")?;
        self.exploration.validate("exploration")?;
        self.beta.validate("beta")?;
        if self.batch_size == 0 {
            return Err(AgentError::InvalidConfig("batch_size must be >= 1".into()));
        }
        if self.buffer_capacity == 0 {
            return Err(AgentError::InvalidConfig(
                "buffer_capacity must be >= 1".into(),
            ));
        }
        if self.update_period == 0 {
            return Err(AgentError::InvalidConfig(
                "update_period must be >= 1".into(),
            ));
        }
        if !self.gap_threshold.is_finite() || self.gap_threshold < 0.0 {
            return Err(AgentError::InvalidConfig(
                "gap_threshold must be >= 0".into(),
            ));
        }
        if self.horizon_cap == 0 {
            return Err(AgentError::InvalidConfig("horizon_cap must be >= 1".into()));
        }
        Ok(())
    }
}

/// One observed transition plus bookkeeping flags.
#[derive(Debug, Clone, Copy)]
pub struct StepOutcome {
    pub state: StateId,
    pub action: ActionId,
    pub reward: f64,
    pub next_state: StateId,
    pub bounds_updated: bool,
}

/// Uniform step interface over a model.
pub trait Agent: Send {
    /// Executes exactly one environment interaction and learning update.
    fn step(&mut self) -> StepOutcome;
    /// Table the agent acts on and is evaluated by (the projected table for
    /// the bounded variants, the average of both tables for double-Q).
    fn eval_q(&self) -> Cow<'_, QTable>;
    /// Current upper/lower bound tables, when the agent maintains them.
    fn bounds(&self) -> Option<(&QTable, &QTable)> {
        None
    }
    /// Mean bound gap over feasible pairs, when bounds exist.
    fn mean_bound_gap(&self) -> Option<f64> {
        None
    }
    /// Count of ordering violations detected on updated entries (must stay 0).
    fn bound_violations(&self) -> u64 {
        0
    }
    /// Sample paths truncated at the horizon cap so far.
    fn truncated_paths(&self) -> u64 {
        0
    }
    fn steps_taken(&self) -> u64;
}

/// Named ChaCha sub-streams derived from one run seed.
pub(crate) struct RngStreams {
    pub init: ChaCha8Rng,
    pub action: ChaCha8Rng,
    pub env: ChaCha8Rng,
    pub bound: ChaCha8Rng,
    pub coin: ChaCha8Rng,
}

pub(crate) fn rng_streams(seed: u64) -> RngStreams {
    let stream = |k: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k);
        rng
    };
    RngStreams {
        init: stream(0),
        action: stream(1),
        env: stream(2),
        bound: stream(3),
        coin: stream(4),
    }
}

/// Fresh Q table per the init mode; terminal rows stay at zero so the table
/// vanishes where the dynamics absorb.
pub(crate) fn initial_table(
    model: &dyn Mdp,
    init: InitMode,
    rho: f64,
    rng: &mut dyn RngCore,
) -> QTable {
    let mut q = QTable::for_model(model, 0.0);
    if init == InitMode::Random {
        for s in 0..model.state_count() {
            for a in 0..model.action_count() {
                let v = (uniform_unit(rng) * 2.0 - 1.0) * rho;
                if !model.is_terminal(StateId(s)) {
                    q.set(StateId(s), ActionId(a), v);
                }
            }
        }
    }
    q
}

/// Epsilon-greedy selection: with probability `eps` a uniform feasible
/// action, otherwise the feasible argmax of `value_of`, lowest index on
/// ties. Index draws use `next_u64 % n` so paired agents consume identical
/// stream positions.
pub(crate) fn epsilon_greedy(
    model: &dyn Mdp,
    s: StateId,
    eps: f64,
    rng: &mut dyn RngCore,
    value_of: impl Fn(ActionId) -> f64,
) -> ActionId {
    if uniform_unit(rng) < eps {
        let feasible: Vec<ActionId> = (0..model.action_count())
            .map(ActionId)
            .filter(|a| model.is_feasible(s, *a))
            .collect();
        feasible[(rng.next_u64() % feasible.len() as u64) as usize]
    } else {
        let mut best = f64::NEG_INFINITY;
        let mut arg = ActionId(0);
        for a in (0..model.action_count()).map(ActionId) {
            if !model.is_feasible(s, a) {
                continue;
            }
            let v = value_of(a);
            if v > best {
                best = v;
                arg = a;
            }
        }
        arg
    }
}

/// Shared stepping state: current position, visit counts, schedules, and the
/// action/environment streams.
pub(crate) struct Core {
    pub model: Arc<dyn Mdp>,
    pub hp: Hyperparams,
    pub counts: VisitCounts,
    pub state: StateId,
    pub step: u64,
    pub action_rng: ChaCha8Rng,
    pub env_rng: ChaCha8Rng,
}

impl Core {
    pub fn new(
        model: Arc<dyn Mdp>,
        hp: Hyperparams,
        action_rng: ChaCha8Rng,
        env_rng: ChaCha8Rng,
    ) -> Self {
        let counts = VisitCounts::new(model.state_count(), model.action_count());
        let state = model.start_state();
        Core {
            model,
            hp,
            counts,
            state,
            step: 0,
            action_rng,
            env_rng,
        }
    }

    /// Episodic reset, action choice, and schedule evaluation for one step.
    /// Returns `(s, a, alpha)` with counts already incremented.
    pub fn choose(
        &mut self,
        value_of: impl Fn(StateId, ActionId) -> f64,
    ) -> (StateId, ActionId, f64) {
        if self.model.is_terminal(self.state) {
            self.state = self.model.start_state();
        }
        let s = self.state;
        let visits = self.counts.visit_state(s);
        let eps = match self.hp.exploration {
            Schedule::Polynomial { exponent } => exploration_rate(visits, exponent),
            Schedule::Constant { value } => value,
        };
        let a = epsilon_greedy(self.model.as_ref(), s, eps, &mut self.action_rng, |a| {
            value_of(s, a)
        });
        let pair_visits = self.counts.visit_pair(s, a);
        let alpha = self.hp.learning.rate(pair_visits);
        (s, a, alpha)
    }

    /// Samples the exogenous noise and applies the transition.
    pub fn observe(&mut self, s: StateId, a: ActionId) -> (crate::mdp::NoiseOutcome, f64, StateId) {
        let w = self.model.sample_noise(&mut self.env_rng);
        let reward = self.model.realized_reward(s, a, w);
        let next = self.model.next_state(s, a, w);
        (w, reward, next)
    }

    /// Bootstrap value of the successor state: zero at terminals.
    pub fn next_value(&self, q: &QTable, next: StateId) -> f64 {
        if self.model.is_terminal(next) {
            0.0
        } else {
            q.state_value(self.model.as_ref(), next)
        }
    }

    pub fn advance(&mut self, next: StateId) {
        self.state = next;
        self.step += 1;
    }
}

/// The plain Q-learning update at a single pair. Only the `(s, a)` entry
/// changes.
pub fn ql_update(
    q: &mut QTable,
    model: &dyn Mdp,
    s: StateId,
    a: ActionId,
    reward: f64,
    next: StateId,
    alpha: f64,
) {
    let bootstrap = if model.is_terminal(next) {
        0.0
    } else {
        q.state_value(model, next)
    };
    let target = reward + model.discount() * bootstrap;
    let old = q.get(s, a);
    q.set(s, a, old + alpha * (target - old));
}

/// Builds an agent by registry name.
pub fn by_name(
    name: &str,
    model: Arc<dyn Mdp>,
    hp: Hyperparams,
    seed: u64,
) -> Result<Box<dyn Agent>, AgentError> {
    hp.validate()?;
    Ok(match name {
        "lbql" => Box::new(LbqlAgent::new(model, hp, LbqlVariant::ReplayBatch, seed)),
        "lbql-ideal" => Box::new(LbqlAgent::new(model, hp, LbqlVariant::Idealized, seed)),
        "lbql-exact" => Box::new(LbqlAgent::new(model, hp, LbqlVariant::ReplayExact, seed)),
        "ql" => Box::new(QlAgent::new(model, hp, seed)),
        "double-ql" => Box::new(DoubleQlAgent::new(model, hp, DoubleCoin::Random, seed)),
        "sql" => Box::new(SpeedyQlAgent::new(model, hp, seed)),
        "bcql" => Box::new(BcqlAgent::new(model, hp, seed)),
        other => return Err(AgentError::UnknownAgent(other.to_string())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs;
    use crate::mdp::rho_bound;

    #[test]
    fn epsilon_one_explores_uniformly_over_feasible_actions() {
        let env = envs::by_name("2-cs-r").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = StateId(0); // only r <= 0 feasible
        let mut seen = std::collections::HashSet::new();
        for _ in 0..2000 {
            let a = epsilon_greedy(env.as_ref(), s, 1.0, &mut rng, |_| 0.0);
            assert!(env.is_feasible(s, a), "sampled infeasible action {}", a.0);
            seen.insert(a.0);
        }
        // all 13 feasible actions should appear
        assert_eq!(seen.len(), 13);
    }

    #[test]
    fn greedy_branch_takes_argmax_with_low_tie_break() {
        let env = envs::by_name("example1").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let vals = [1.0, 3.0];
        let a = epsilon_greedy(env.as_ref(), StateId(0), 0.0, &mut rng, |a| vals[a.0]);
        assert_eq!(a, ActionId(1));
        let a = epsilon_greedy(env.as_ref(), StateId(0), 0.0, &mut rng, |_| 0.0);
        assert_eq!(a, ActionId(0), "ties break to the lowest index");
    }

    #[test]
    fn ql_update_examples() {
        let env = envs::by_name("example1").unwrap();
        let model = env.as_ref();
        // alpha = 1 against a terminal successor pins the entry at the reward
        let mut q = QTable::for_model(model, 0.0);
        ql_update(
            &mut q,
            model,
            StateId(0),
            ActionId(0),
            -1.0,
            StateId(2),
            1.0,
        );
        assert_eq!(q.get(StateId(0), ActionId(0)), -1.0);

        // first update from zeros with alpha 0.1, r = -1, successor A
        let mut q = QTable::for_model(model, 0.0);
        ql_update(
            &mut q,
            model,
            StateId(0),
            ActionId(1),
            -1.0,
            StateId(0),
            0.1,
        );
        assert!((q.get(StateId(0), ActionId(1)) + 0.1).abs() < 1e-12);

        // alpha = 0 leaves the table untouched
        let before = q.clone();
        ql_update(&mut q, model, StateId(0), ActionId(1), 5.0, StateId(1), 0.0);
        assert_eq!(q, before);
    }

    #[test]
    fn initial_tables_are_seeded_and_respect_terminals() {
        let env = envs::by_name("example1").unwrap();
        let rho = rho_bound(env.as_ref());
        assert!((rho - 20.0).abs() < 1e-12);
        let draw = |seed: u64| {
            let mut streams = rng_streams(seed);
            initial_table(env.as_ref(), InitMode::Random, rho, &mut streams.init)
        };
        let a = draw(7);
        let b = draw(7);
        assert_eq!(a, b, "same seed, same table");
        let c = draw(8);
        assert_ne!(a, c);
        for v in a.row(StateId(2)) {
            assert_eq!(*v, 0.0, "terminal rows stay at zero");
        }
        for s in 0..2 {
            for v in a.row(StateId(s)) {
                assert!(v.abs() <= rho);
            }
        }
        assert!(
            a.as_slice().iter().any(|v| v.abs() > 1.0),
            "spread should fill [-rho, rho]"
        );
        let z = {
            let mut streams = rng_streams(7);
            initial_table(env.as_ref(), InitMode::Zero, rho, &mut streams.init)
        };
        assert!(z.as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn bad_hyperparameters_are_rejected() {
        let env = envs::by_name("example1").unwrap();
        let hp = Hyperparams {
            batch_size: 0,
            ..Hyperparams::default()
        };
        assert!(matches!(
            by_name("lbql", env.clone(), hp, 0),
            Err(AgentError::InvalidConfig(_))
        ));
        let hp = Hyperparams {
            beta: Schedule::Constant { value: 0.0 },
            ..Hyperparams::default()
        };
        assert!(by_name("lbql", env.clone(), hp, 0).is_err());
        assert!(matches!(
            by_name("nope", env.clone(), Hyperparams::default(), 0),
            Err(AgentError::UnknownAgent(_))
        ));
    }
}
