//! Baseline learners sharing the common schedules and action selection:
//! plain Q-learning, double Q-learning, speedy Q-learning, and
//! bias-corrected Q-learning.

use super::{initial_table, rng_streams, Agent, Core, Hyperparams, StepOutcome};
use crate::mdp::{rho_bound, uniform_unit, ActionId, Mdp, QTable, StateId};
use rand_chacha::ChaCha8Rng;
use std::borrow::Cow;
use std::sync::Arc;

pub struct QlAgent {
    core: Core,
    q: QTable,
}

impl QlAgent {
    pub fn new(model: Arc<dyn Mdp>, hp: Hyperparams, seed: u64) -> Self {
        let mut streams = rng_streams(seed);
        let rho = rho_bound(model.as_ref());
        let q = initial_table(model.as_ref(), hp.init, rho, &mut streams.init);
        QlAgent {
            core: Core::new(model, hp, streams.action, streams.env),
            q,
        }
    }

    pub fn q(&self) -> &QTable {
        &self.q
    }
}

impl Agent for QlAgent {
    fn step(&mut self) -> StepOutcome {
        let q = &self.q;
        let (s, a, alpha) = self.core.choose(|s, a| q.get(s, a));
        let (_, reward, next) = self.core.observe(s, a);
        let target = reward + self.core.model.discount() * self.core.next_value(&self.q, next);
        let old = self.q.get(s, a);
        self.q.set(s, a, old + alpha * (target - old));
        self.core.advance(next);
        StepOutcome {
            state: s,
            action: a,
            reward,
            next_state: next,
            bounds_updated: false,
        }
    }

    fn eval_q(&self) -> Cow<'_, QTable> {
        Cow::Borrowed(&self.q)
    }

    fn steps_taken(&self) -> u64 {
        self.core.step
    }
}

/// How double Q-learning picks the table to update each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DoubleCoin {
    /// Fair coin from the dedicated stream.
    Random,
    /// Apply both updates, computed from the pre-step tables. With equal
    /// initial tables this collapses to plain Q-learning (each table then
    /// sees the same sequence of updates).
    Both,
}

pub struct DoubleQlAgent {
    core: Core,
    qa: QTable,
    qb: QTable,
    coin: DoubleCoin,
    coin_rng: ChaCha8Rng,
}

impl DoubleQlAgent {
    pub fn new(model: Arc<dyn Mdp>, hp: Hyperparams, coin: DoubleCoin, seed: u64) -> Self {
        let mut streams = rng_streams(seed);
        let rho = rho_bound(model.as_ref());
        // both tables start from the same draw
        let qa = initial_table(model.as_ref(), hp.init, rho, &mut streams.init);
        let qb = qa.clone();
        DoubleQlAgent {
            core: Core::new(model, hp, streams.action, streams.env),
            qa,
            qb,
            coin,
            coin_rng: streams.coin,
        }
    }

    /// Cross-table target: the argmax comes from `own`, the bootstrap value
    /// from `other`.
    fn cross_target(
        model: &dyn Mdp,
        own: &QTable,
        other: &QTable,
        reward: f64,
        next: StateId,
    ) -> f64 {
        if model.is_terminal(next) {
            reward
        } else {
            let best = own.greedy_action(model, next);
            reward + model.discount() * other.get(next, best)
        }
    }
}

impl Agent for DoubleQlAgent {
    fn step(&mut self) -> StepOutcome {
        let (qa, qb) = (&self.qa, &self.qb);
        let (s, a, alpha) = self.core.choose(|s, a| qa.get(s, a) + qb.get(s, a));
        let (_, reward, next) = self.core.observe(s, a);
        let model = self.core.model.as_ref();
        match self.coin {
            DoubleCoin::Random => {
                if uniform_unit(&mut self.coin_rng) < 0.5 {
                    let target = Self::cross_target(model, &self.qa, &self.qb, reward, next);
                    let old = self.qa.get(s, a);
                    self.qa.set(s, a, old + alpha * (target - old));
                } else {
                    let target = Self::cross_target(model, &self.qb, &self.qa, reward, next);
                    let old = self.qb.get(s, a);
                    self.qb.set(s, a, old + alpha * (target - old));
                }
            }
            DoubleCoin::Both => {
                let ta = Self::cross_target(model, &self.qa, &self.qb, reward, next);
                let tb = Self::cross_target(model, &self.qb, &self.qa, reward, next);
                let oa = self.qa.get(s, a);
                let ob = self.qb.get(s, a);
                self.qa.set(s, a, oa + alpha * (ta - oa));
                self.qb.set(s, a, ob + alpha * (tb - ob));
            }
        }
        self.core.advance(next);
        StepOutcome {
            state: s,
            action: a,
            reward,
            next_state: next,
            bounds_updated: false,
        }
    }

    /// Metric table: the average of both estimates (the sum drives action
    /// selection but doubles the value scale).
    fn eval_q(&self) -> Cow<'_, QTable> {
        let mut avg = self.qa.clone();
        for (v, w) in avg.as_mut_slice().iter_mut().zip(self.qb.as_slice()) {
            *v = 0.5 * (*v + w);
        }
        Cow::Owned(avg)
    }

    fn steps_taken(&self) -> u64 {
        self.core.step
    }
}

/// Speedy Q-learning: keeps the previous iterate and extrapolates the
/// empirical Bellman operator difference.
pub struct SpeedyQlAgent {
    core: Core,
    cur: QTable,
    prev: QTable,
}

impl SpeedyQlAgent {
    pub fn new(model: Arc<dyn Mdp>, hp: Hyperparams, seed: u64) -> Self {
        let mut streams = rng_streams(seed);
        let rho = rho_bound(model.as_ref());
        let cur = initial_table(model.as_ref(), hp.init, rho, &mut streams.init);
        let prev = cur.clone();
        SpeedyQlAgent {
            core: Core::new(model, hp, streams.action, streams.env),
            cur,
            prev,
        }
    }
}

impl Agent for SpeedyQlAgent {
    fn step(&mut self) -> StepOutcome {
        let cur = &self.cur;
        let (s, a, alpha) = self.core.choose(|s, a| cur.get(s, a));
        let (_, reward, next) = self.core.observe(s, a);
        let gamma = self.core.model.discount();
        let t_prev = reward + gamma * self.core.next_value(&self.prev, next);
        let t_cur = reward + gamma * self.core.next_value(&self.cur, next);
        let old = self.cur.get(s, a);
        let new = old + alpha * (t_prev - old) + (1.0 - alpha) * (t_cur - t_prev);
        self.prev.set(s, a, old);
        self.cur.set(s, a, new);
        self.core.advance(next);
        StepOutcome {
            state: s,
            action: a,
            reward,
            next_state: next,
            bounds_updated: false,
        }
    }

    fn eval_q(&self) -> Cow<'_, QTable> {
        Cow::Borrowed(&self.cur)
    }

    fn steps_taken(&self) -> u64 {
        self.core.step
    }
}

/// Bias-corrected Q-learning: subtracts an estimate of the max-operator
/// bias from the bootstrap. The correction at a pair is
/// `c_K * sigma(s, a) / sqrt(nu(s, a))`, where `sigma` is the running
/// standard deviation of observed rewards there and `c_K` is the expected
/// maximum of K standard normals (estimated once by Monte Carlo).
pub struct BcqlAgent {
    core: Core,
    q: QTable,
    reward_mean: Vec<f64>,
    reward_m2: Vec<f64>,
    c_k: f64,
}

/// Expected maximum of `k` i.i.d. standard normals, by fixed-seed Monte
/// Carlo (Box-Muller draws).
pub fn expected_max_of_normals(k: usize) -> f64 {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_C0DE);
    let mut total = 0.0;
    let iterations = 200_000;
    for _ in 0..iterations {
        let mut best = f64::NEG_INFINITY;
        for _ in 0..k {
            let u1 = uniform_unit(&mut rng).max(1e-18);
            let u2 = uniform_unit(&mut rng);
            let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
            if z > best {
                best = z;
            }
        }
        total += best;
    }
    total / iterations as f64
}

impl BcqlAgent {
    pub fn new(model: Arc<dyn Mdp>, hp: Hyperparams, seed: u64) -> Self {
        let mut streams = rng_streams(seed);
        let rho = rho_bound(model.as_ref());
        let q = initial_table(model.as_ref(), hp.init, rho, &mut streams.init);
        let pairs = model.pair_count();
        let c_k = expected_max_of_normals(hp.batch_size);
        BcqlAgent {
            core: Core::new(model, hp, streams.action, streams.env),
            q,
            reward_mean: vec![0.0; pairs],
            reward_m2: vec![0.0; pairs],
            c_k,
        }
    }

    /// Current correction at a pair: zero until two observations exist.
    pub fn correction(&self, s: StateId, a: ActionId) -> f64 {
        let idx = s.0 * self.core.model.action_count() + a.0;
        let n = self.core.counts.pair(s, a);
        if n < 2 {
            return 0.0;
        }
        let sigma = (self.reward_m2[idx] / (n - 1) as f64).sqrt();
        self.c_k * sigma / (n as f64).sqrt()
    }
}

impl Agent for BcqlAgent {
    fn step(&mut self) -> StepOutcome {
        let q = &self.q;
        let (s, a, alpha) = self.core.choose(|s, a| q.get(s, a));
        let (_, reward, next) = self.core.observe(s, a);

        // Welford update of the per-pair reward statistics
        let idx = s.0 * self.core.model.action_count() + a.0;
        let n = self.core.counts.pair(s, a) as f64;
        let delta = reward - self.reward_mean[idx];
        self.reward_mean[idx] += delta / n;
        self.reward_m2[idx] += delta * (reward - self.reward_mean[idx]);

        let correction = self.correction(s, a);
        let gamma = self.core.model.discount();
        let target = reward + gamma * (self.core.next_value(&self.q, next) - correction);
        let old = self.q.get(s, a);
        self.q.set(s, a, old + alpha * (target - old));
        self.core.advance(next);
        StepOutcome {
            state: s,
            action: a,
            reward,
            next_state: next,
            bounds_updated: false,
        }
    }

    fn eval_q(&self) -> Cow<'_, QTable> {
        Cow::Borrowed(&self.q)
    }

    fn steps_taken(&self) -> u64 {
        self.core.step
    }
}
