//! Q-learning with lookahead bounds.
//!
//! Every step performs the usual Q-update, then (variant-dependent) solves a
//! pair of sampled inner DPs with the freshly updated table as the penalty
//! table, tracks the resulting upper/lower estimates by stochastic
//! approximation, and finally projects the updated entry into `[L, U]`.
//!
//! Variants differ in where expectations and sample paths come from:
//!
//! - [`LbqlVariant::Idealized`]: bounds at the visited pair every step;
//!   fresh model batches of size K per inner-DP step; paths from the model.
//! - [`LbqlVariant::ReplayExact`]: bounds at the visited pair every step;
//!   expectations under the running empirical noise distribution; paths
//!   resampled from the observation history.
//! - [`LbqlVariant::ReplayBatch`] (the experiment default): a ring buffer of
//!   capacity kappa; once warm and every m-th step, if the visited pair's
//!   gap still exceeds delta, one fixed batch and one buffer path drive an
//!   all-pairs bound sweep. Only the visited pair is projected, so the
//!   iteration stays asynchronous.

use super::{initial_table, rng_streams, Agent, Core, Hyperparams, Schedule, StepOutcome};
use crate::bounds::{
    bound_pair, bound_tables, EmpiricalNoiseDist, ExpectationMode, PenaltyContext, SamplePath,
};
use crate::mdp::{rho_bound, ActionId, Mdp, NoiseOutcome, QTable, StateId};
use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use std::borrow::Cow;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LbqlVariant {
    Idealized,
    ReplayExact,
    ReplayBatch,
}

struct RingBuffer {
    data: Vec<NoiseOutcome>,
    cap: usize,
    next: usize,
}

impl RingBuffer {
    fn new(cap: usize) -> Self {
        RingBuffer {
            data: Vec::with_capacity(cap),
            cap,
            next: 0,
        }
    }

    fn push(&mut self, w: NoiseOutcome) {
        if self.data.len() < self.cap {
            self.data.push(w);
        } else {
            self.data[self.next] = w;
            self.next = (self.next + 1) % self.cap;
        }
    }

    fn as_slice(&self) -> &[NoiseOutcome] {
        &self.data
    }
}

pub struct LbqlAgent {
    core: Core,
    variant: LbqlVariant,
    /// The projected table the agent acts on.
    q_prime: QTable,
    upper: QTable,
    lower: QTable,
    rho: f64,
    buffer: RingBuffer,
    empirical: EmpiricalNoiseDist,
    bound_rng: ChaCha8Rng,
    /// Bound-update counts: per visited pair for the every-step variants,
    /// global for the all-pairs variant (drives polynomial beta schedules).
    pair_updates: Vec<u64>,
    global_updates: u64,
    violations: u64,
    truncated: u64,
    gap_sum: f64,
    feasible_pairs: usize,
}

impl LbqlAgent {
    pub fn new(model: Arc<dyn Mdp>, hp: Hyperparams, variant: LbqlVariant, seed: u64) -> Self {
        let mut streams = rng_streams(seed);
        let rho = rho_bound(model.as_ref());
        let q_prime = initial_table(model.as_ref(), hp.init, rho, &mut streams.init);
        let upper = QTable::for_model(model.as_ref(), rho);
        let lower = QTable::for_model(model.as_ref(), -rho);
        let feasible_pairs = (0..model.state_count())
            .flat_map(|s| (0..model.action_count()).map(move |a| (s, a)))
            .filter(|&(s, a)| model.is_feasible(StateId(s), ActionId(a)))
            .count();
        let pairs = model.pair_count();
        let buffer = RingBuffer::new(hp.buffer_capacity);
        let core = Core::new(model, hp, streams.action, streams.env);
        let mut agent = LbqlAgent {
            core,
            variant,
            q_prime,
            upper,
            lower,
            rho,
            buffer,
            empirical: EmpiricalNoiseDist::new(),
            bound_rng: streams.bound,
            pair_updates: vec![0; pairs],
            global_updates: 0,
            violations: 0,
            truncated: 0,
            gap_sum: 0.0,
            feasible_pairs,
        };
        agent.recompute_gap();
        agent
    }

    pub fn q_prime(&self) -> &QTable {
        &self.q_prime
    }

    pub fn upper(&self) -> &QTable {
        &self.upper
    }

    pub fn lower(&self) -> &QTable {
        &self.lower
    }

    pub fn pair_visits(&self, s: StateId, a: ActionId) -> u64 {
        self.core.counts.pair(s, a)
    }

    fn recompute_gap(&mut self) {
        let model = self.core.model.as_ref();
        let mut sum = 0.0;
        for s in 0..model.state_count() {
            for a in 0..model.action_count() {
                if model.is_feasible(StateId(s), ActionId(a)) {
                    sum += self.upper.get(StateId(s), ActionId(a))
                        - self.lower.get(StateId(s), ActionId(a));
                }
            }
        }
        self.gap_sum = sum;
    }

    /// Stochastic-approximation step on one pair's bounds, with the one-sided
    /// clamps keeping `U >= -rho` and `L <= rho`. The `(1 - beta) x + beta y`
    /// form preserves `U >= L` under rounding because both updates share it.
    fn track_pair(&mut self, s: StateId, a: ActionId, beta: f64, up: f64, low: f64) {
        let old_gap = self.upper.get(s, a) - self.lower.get(s, a);
        self.track_pair_from(s, a, beta, up, low);
        if self.core.model.is_feasible(s, a) {
            let new_gap = self.upper.get(s, a) - self.lower.get(s, a);
            self.gap_sum += new_gap - old_gap;
        }
    }

    fn beta_for_pair(&mut self, s: StateId, a: ActionId) -> f64 {
        let idx = s.0 * self.core.model.action_count() + a.0;
        self.pair_updates[idx] += 1;
        match self.core.hp.beta {
            Schedule::Constant { value } => value,
            Schedule::Polynomial { .. } => self.core.hp.beta.rate(self.pair_updates[idx]),
        }
    }

    /// Variant-specific bound phase. `q_new` is the unprojected Q-update at
    /// the visited pair; the penalty table is the acting table with that one
    /// entry overridden.
    fn bound_phase(&mut self, s: StateId, a: ActionId, w: NoiseOutcome, q_new: f64) -> bool {
        let hp = self.core.hp;
        let model = Arc::clone(&self.core.model);
        let model = model.as_ref();
        match self.variant {
            LbqlVariant::Idealized => {
                let path = SamplePath::draw_from_model(model, hp.horizon_cap, &mut self.bound_rng);
                if path.horizon() == hp.horizon_cap {
                    self.truncated += 1;
                }
                let ctx = PenaltyContext::with_override(
                    model,
                    &self.q_prime,
                    Some((s, a, q_new)),
                    ExpectationMode::FreshBatches { k: hp.batch_size },
                );
                let pair = bound_pair(model, &path, &ctx, s, a, &mut self.bound_rng)
                    .expect("model sampling cannot fail");
                let beta = self.beta_for_pair(s, a);
                self.track_pair(s, a, beta, pair.upper, pair.lower);
                true
            }
            LbqlVariant::ReplayExact => {
                self.empirical.record(w);
                let tau = crate::mdp::sample_horizon(
                    model.discount(),
                    &mut self.bound_rng,
                    hp.horizon_cap,
                );
                if tau == hp.horizon_cap {
                    self.truncated += 1;
                }
                let noises: Vec<NoiseOutcome> = (0..tau)
                    .map(|_| {
                        self.empirical
                            .sample(&mut self.bound_rng)
                            .expect("just recorded")
                    })
                    .collect();
                let path = SamplePath::new(noises).expect("tau >= 1");
                let ctx = PenaltyContext::with_override(
                    model,
                    &self.q_prime,
                    Some((s, a, q_new)),
                    ExpectationMode::Empirical {
                        dist: &self.empirical,
                    },
                );
                let pair = bound_pair(model, &path, &ctx, s, a, &mut self.bound_rng)
                    .expect("empirical distribution is non-empty");
                let beta = self.beta_for_pair(s, a);
                self.track_pair(s, a, beta, pair.upper, pair.lower);
                true
            }
            LbqlVariant::ReplayBatch => {
                self.buffer.push(w);
                let n = self.core.step;
                let due = n >= hp.buffer_capacity as u64
                    && n.is_multiple_of(hp.update_period as u64)
                    && self.upper.get(s, a) - self.lower.get(s, a) > hp.gap_threshold;
                if !due {
                    return false;
                }
                let stored = self.buffer.as_slice();
                let batch: Vec<NoiseOutcome> = (0..hp.batch_size)
                    .map(|_| stored[(self.bound_rng.next_u64() % stored.len() as u64) as usize])
                    .collect();
                let path = SamplePath::draw_from_buffer(
                    model.discount(),
                    stored,
                    hp.horizon_cap,
                    &mut self.bound_rng,
                )
                .expect("buffer is warm");
                if path.horizon() == hp.horizon_cap {
                    self.truncated += 1;
                }
                let ctx = PenaltyContext::with_override(
                    model,
                    &self.q_prime,
                    Some((s, a, q_new)),
                    ExpectationMode::FixedBatch { batch: &batch },
                );
                let (up, low) = bound_tables(model, &path, &ctx, &mut self.bound_rng)
                    .expect("batch is non-empty");
                self.global_updates += 1;
                let beta = match self.core.hp.beta {
                    Schedule::Constant { value } => value,
                    Schedule::Polynomial { .. } => self.core.hp.beta.rate(self.global_updates),
                };
                for s in (0..model.state_count()).map(StateId) {
                    for a in (0..model.action_count()).map(ActionId) {
                        self.track_pair_from(s, a, beta, up.get(s, a), low.get(s, a));
                    }
                }
                self.recompute_gap();
                true
            }
        }
    }

    fn track_pair_from(&mut self, s: StateId, a: ActionId, beta: f64, up: f64, low: f64) {
        let new_u = ((1.0 - beta) * self.upper.get(s, a) + beta * up).max(-self.rho);
        let new_l = ((1.0 - beta) * self.lower.get(s, a) + beta * low).min(self.rho);
        if new_u < new_l {
            self.violations += 1;
        }
        self.upper.set(s, a, new_u);
        self.lower.set(s, a, new_l);
    }
}

impl Agent for LbqlAgent {
    fn step(&mut self) -> StepOutcome {
        let model = Arc::clone(&self.core.model);
        let model_ref = model.as_ref();
        let q = &self.q_prime;
        let (s, a, alpha) = self.core.choose(|s, a| q.get(s, a));
        let (w, reward, next) = self.core.observe(s, a);

        // Q-update on the projected table; the result is kept as a scalar
        // overlay until projection.
        let bootstrap = self.core.next_value(&self.q_prime, next);
        let old = self.q_prime.get(s, a);
        let q_new = old + alpha * (reward + model_ref.discount() * bootstrap - old);

        let updated = self.bound_phase(s, a, w, q_new);

        // project only the visited pair; the rest of the table carries over
        let u = self.upper.get(s, a);
        let l = self.lower.get(s, a);
        if l > u {
            self.violations += 1;
        }
        let projected = q_new.min(u).max(l);
        self.q_prime.set(s, a, projected);
        debug_assert!(l <= projected && projected <= u);
        if self.core.hp.project_all_pairs && updated {
            for ps in (0..model_ref.state_count()).map(StateId) {
                for pa in (0..model_ref.action_count()).map(ActionId) {
                    let v = self.q_prime.get(ps, pa);
                    let pu = self.upper.get(ps, pa);
                    let pl = self.lower.get(ps, pa);
                    self.q_prime.set(ps, pa, v.min(pu).max(pl));
                }
            }
        }

        self.core.advance(next);
        StepOutcome {
            state: s,
            action: a,
            reward,
            next_state: next,
            bounds_updated: updated,
        }
    }

    fn eval_q(&self) -> Cow<'_, QTable> {
        Cow::Borrowed(&self.q_prime)
    }

    fn bounds(&self) -> Option<(&QTable, &QTable)> {
        Some((&self.upper, &self.lower))
    }

    fn mean_bound_gap(&self) -> Option<f64> {
        Some(self.gap_sum / self.feasible_pairs as f64)
    }

    fn bound_violations(&self) -> u64 {
        self.violations
    }

    fn truncated_paths(&self) -> u64 {
        self.truncated
    }

    fn steps_taken(&self) -> u64 {
        self.core.step
    }
}
