//! The duality engine: dual-feasible penalties built from a bounded
//! state-action table, absorption-time sample paths, and the backward inner
//! DPs that turn one path into paired upper and lower estimates of `Q*`.
//!
//! The discounted problem is treated in its absorption-time form: an implicit
//! zero-value absorbing state is reached with probability `1 - gamma` each
//! step, so a path is a finite noise sequence `(w_1, ..., w_tau)` with
//! geometric horizon. The absorbing state is never materialized; because the
//! penalty table vanishes there, every expectation over the absorbing
//! transition folds into `gamma * E[phi(f(s, a, w), pi(f(s, a, w)))]`.
//!
//! Penalties subtract, per step, the value of seeing the next noise ahead of
//! time: `zeta = phi(s', pi(s')) - gamma * E[phi(f(s, a, .), pi(...))]`,
//! which has zero mean under any non-anticipative policy. The upper problem
//! maximizes over actions along the path; the lower problem follows the
//! greedy policy of `phi`. Per-step rewards enter as expected rewards
//! estimated from the same source as the penalty expectation (the model
//! distribution, a sample batch, or an empirical distribution), which makes
//! the estimates unbiased and, when `phi` is the exact optimum, collapses the
//! variance of both bounds to zero.
//!
//! The single most correctness-critical rule here: whenever an upper and a
//! lower value are paired, they must consume the same path and the same
//! per-step expectation values. That is what makes `upper >= lower` hold
//! deterministically rather than just in expectation.

use crate::mdp::{sample_horizon, ActionId, Mdp, NoiseOutcome, QTable, StateId};
use rand::RngCore;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("empty noise buffer: no observations recorded yet")]
    EmptyBuffer,
    #[error("empty sample batch")]
    EmptyBatch,
    #[error("sample path must contain at least one noise outcome")]
    EmptyPath,
    #[error("model '{0}' has no enumerable support; exact expectations unavailable")]
    NoSupport(String),
}

/// A finite noise sequence `(w_1, ..., w_tau)`; the horizon is the length.
#[derive(Debug, Clone)]
pub struct SamplePath {
    noises: Vec<NoiseOutcome>,
}

impl SamplePath {
    pub fn new(noises: Vec<NoiseOutcome>) -> Result<Self, BoundsError> {
        if noises.is_empty() {
            return Err(BoundsError::EmptyPath);
        }
        Ok(Self { noises })
    }

    /// Draws a geometric horizon and fills the path from the model's noise
    /// distribution.
    pub fn draw_from_model(model: &dyn Mdp, cap: usize, rng: &mut dyn RngCore) -> Self {
        let tau = sample_horizon(model.discount(), rng, cap);
        let noises = (0..tau).map(|_| model.sample_noise(rng)).collect();
        Self { noises }
    }

    /// Draws a geometric horizon and fills the path uniformly (with
    /// replacement) from recorded observations.
    pub fn draw_from_buffer(
        gamma: f64,
        buffer: &[NoiseOutcome],
        cap: usize,
        rng: &mut dyn RngCore,
    ) -> Result<Self, BoundsError> {
        if buffer.is_empty() {
            return Err(BoundsError::EmptyBuffer);
        }
        let tau = sample_horizon(gamma, rng, cap);
        let noises = (0..tau)
            .map(|_| buffer[(rng.next_u64() % buffer.len() as u64) as usize])
            .collect();
        Ok(Self { noises })
    }

    pub fn horizon(&self) -> usize {
        self.noises.len()
    }

    pub fn noises(&self) -> &[NoiseOutcome] {
        &self.noises
    }
}

/// Observation counts over a finite noise support; probabilities are
/// `N(w) / n`.
#[derive(Debug, Clone, Default)]
pub struct EmpiricalNoiseDist {
    counts: BTreeMap<u64, u64>,
    total: u64,
}

impl EmpiricalNoiseDist {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, w: NoiseOutcome) {
        *self.counts.entry(w.0).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn support_size(&self) -> usize {
        self.counts.len()
    }

    pub fn prob(&self, w: NoiseOutcome) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            *self.counts.get(&w.0).unwrap_or(&0) as f64 / self.total as f64
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (NoiseOutcome, f64)> + '_ {
        let total = self.total as f64;
        self.counts
            .iter()
            .map(move |(&code, &count)| (NoiseOutcome(code), count as f64 / total))
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> Result<NoiseOutcome, BoundsError> {
        if self.total == 0 {
            return Err(BoundsError::EmptyBuffer);
        }
        let target = rng.next_u64() % self.total;
        let mut acc = 0u64;
        for (&code, &count) in &self.counts {
            acc += count;
            if target < acc {
                return Ok(NoiseOutcome(code));
            }
        }
        unreachable!("counts sum to total")
    }
}

/// How penalty (and per-step reward) expectations are estimated.
pub enum ExpectationMode<'a> {
    /// Full enumeration of the model's noise support.
    Exact,
    /// A fresh batch of `k` model samples per inner-DP step.
    FreshBatches { k: usize },
    /// One fixed batch serving every step of both recursions.
    FixedBatch { batch: &'a [NoiseOutcome] },
    /// Expectation under recorded observation frequencies.
    Empirical { dist: &'a EmpiricalNoiseDist },
}

/// A penalty evaluator: the greedy policy and per-state values of a bounded
/// table `phi`, together with an expectation source.
///
/// `phi` may be given as a base table plus a single-entry override, so the
/// freshly updated Q-iterate can serve as the penalty table without copying.
pub struct PenaltyContext<'a> {
    model: &'a dyn Mdp,
    greedy: Vec<ActionId>,
    value: Vec<f64>,
    mode: ExpectationMode<'a>,
}

impl<'a> PenaltyContext<'a> {
    pub fn new(model: &'a dyn Mdp, phi: &QTable, mode: ExpectationMode<'a>) -> Self {
        Self::with_override(model, phi, None, mode)
    }

    pub fn with_override(
        model: &'a dyn Mdp,
        phi: &QTable,
        patch: Option<(StateId, ActionId, f64)>,
        mode: ExpectationMode<'a>,
    ) -> Self {
        let states = model.state_count();
        let actions = model.action_count();
        let mut greedy = Vec::with_capacity(states);
        let mut value = Vec::with_capacity(states);
        for s in 0..states {
            let s = StateId(s);
            let mut best = f64::NEG_INFINITY;
            let mut arg = ActionId(0);
            for a in 0..actions {
                let a = ActionId(a);
                if !model.is_feasible(s, a) {
                    continue;
                }
                let v = match patch {
                    Some((ps, pa, pv)) if ps == s && pa == a => pv,
                    _ => phi.get(s, a),
                };
                if v > best {
                    best = v;
                    arg = a;
                }
            }
            greedy.push(arg);
            value.push(best);
        }
        Self {
            model,
            greedy,
            value,
            mode,
        }
    }

    /// Greedy policy of `phi`, lowest action index on ties.
    pub fn policy(&self) -> &[ActionId] {
        &self.greedy
    }

    /// `phi(s, pi_phi(s))` per state.
    pub fn phi_value(&self) -> &[f64] {
        &self.value
    }

    /// One penalty term `zeta`. The realized next state enters through
    /// `w_next`; on the final step of a path the realized successor is the
    /// absorbing state, where `phi` vanishes.
    ///
    /// In fresh-batch mode each call draws its own batch; recursions that
    /// need shared expectations resolve them once per step instead.
    pub fn penalty(
        &self,
        s: StateId,
        a: ActionId,
        w_next: NoiseOutcome,
        is_final_step: bool,
        rng: &mut dyn RngCore,
    ) -> Result<f64, BoundsError> {
        let step = self.resolve_step(rng)?;
        let (e_phi, _) = self.pair_expectation(s, a, &step)?;
        let phi_next = if is_final_step {
            0.0
        } else {
            self.value[self.model.next_state(s, a, w_next).0]
        };
        Ok(phi_next - self.model.discount() * e_phi)
    }

    /// Resolves the expectation source for one inner-DP step.
    fn resolve_step(&self, rng: &mut dyn RngCore) -> Result<StepExpectation<'_>, BoundsError> {
        match &self.mode {
            ExpectationMode::Exact => Ok(StepExpectation::Exact),
            ExpectationMode::FixedBatch { batch } => {
                if batch.is_empty() {
                    Err(BoundsError::EmptyBatch)
                } else {
                    Ok(StepExpectation::Batch(BatchRef::Borrowed(batch)))
                }
            }
            ExpectationMode::Empirical { dist } => {
                if dist.total() == 0 {
                    Err(BoundsError::EmptyBuffer)
                } else {
                    Ok(StepExpectation::Empirical(dist))
                }
            }
            ExpectationMode::FreshBatches { k } => {
                assert!(*k >= 1, "batch size must be at least 1");
                let batch = (0..*k).map(|_| self.model.sample_noise(rng)).collect();
                Ok(StepExpectation::Batch(BatchRef::Owned(batch)))
            }
        }
    }

    /// Expectations of `(phi(f(s,a,w), pi(f(s,a,w))), g(s,a,w))` under the
    /// step's source; the first is not yet discount-folded.
    fn pair_expectation(
        &self,
        s: StateId,
        a: ActionId,
        step: &StepExpectation<'_>,
    ) -> Result<(f64, f64), BoundsError> {
        let model = self.model;
        match step {
            StepExpectation::Exact => {
                let support = model
                    .noise_support()
                    .ok_or_else(|| BoundsError::NoSupport(model.name().to_string()))?;
                let mut e_phi = 0.0;
                for (w, p) in support.iter() {
                    e_phi += p * self.value[model.next_state(s, a, w).0];
                }
                Ok((e_phi, model.expected_reward(s, a)))
            }
            StepExpectation::Batch(batch) => {
                let batch = batch.as_slice();
                let mut e_phi = 0.0;
                let mut e_r = 0.0;
                for &w in batch {
                    e_phi += self.value[model.next_state(s, a, w).0];
                    e_r += model.realized_reward(s, a, w);
                }
                let k = batch.len() as f64;
                Ok((e_phi / k, e_r / k))
            }
            StepExpectation::Empirical(dist) => {
                let mut e_phi = 0.0;
                let mut e_r = 0.0;
                for (w, p) in dist.iter() {
                    e_phi += p * self.value[model.next_state(s, a, w).0];
                    e_r += p * model.realized_reward(s, a, w);
                }
                Ok((e_phi, e_r))
            }
        }
    }

    /// Dense `(gamma-folded phi expectation, expected reward)` tables for an
    /// all-pairs sweep.
    fn materialize(&self, step: &StepExpectation<'_>) -> Result<(Vec<f64>, Vec<f64>), BoundsError> {
        let states = self.model.state_count();
        let actions = self.model.action_count();
        let gamma = self.model.discount();
        let mut e_phi = vec![0.0; states * actions];
        let mut e_r = vec![0.0; states * actions];
        for s in 0..states {
            for a in 0..actions {
                let (p, r) = self.pair_expectation(StateId(s), ActionId(a), step)?;
                e_phi[s * actions + a] = gamma * p;
                e_r[s * actions + a] = r;
            }
        }
        Ok((e_phi, e_r))
    }
}

enum BatchRef<'a> {
    Borrowed(&'a [NoiseOutcome]),
    Owned(Vec<NoiseOutcome>),
}

impl BatchRef<'_> {
    fn as_slice(&self) -> &[NoiseOutcome] {
        match self {
            BatchRef::Borrowed(b) => b,
            BatchRef::Owned(v) => v,
        }
    }
}

enum StepExpectation<'a> {
    Exact,
    Batch(BatchRef<'a>),
    Empirical(&'a EmpiricalNoiseDist),
}

/// Paired estimates from one sample path; `upper >= lower` holds exactly.
#[derive(Debug, Clone, Copy)]
pub struct BoundPair {
    pub upper: f64,
    pub lower: f64,
}

/// One expectation source per path step, shared between the paired upper and
/// lower recursions. Fresh batches are drawn once, in step order; the other
/// modes are step-independent.
enum PathSteps<'c> {
    Shared(StepExpectation<'c>),
    PerStep(Vec<StepExpectation<'c>>),
}

impl<'c> PathSteps<'c> {
    fn resolve(
        ctx: &'c PenaltyContext<'_>,
        horizon: usize,
        rng: &mut dyn RngCore,
    ) -> Result<Self, BoundsError> {
        match &ctx.mode {
            ExpectationMode::FreshBatches { .. } => Ok(PathSteps::PerStep(
                (0..horizon)
                    .map(|_| ctx.resolve_step(rng))
                    .collect::<Result<_, _>>()?,
            )),
            _ => Ok(PathSteps::Shared(ctx.resolve_step(rng)?)),
        }
    }

    fn at(&self, t: usize) -> &StepExpectation<'c> {
        match self {
            PathSteps::Shared(step) => step,
            PathSteps::PerStep(steps) => &steps[t],
        }
    }
}

/// Upper-bound inner DP at a single pair: roll the reachable state layers
/// forward along the path, then sweep backward maximizing over feasible
/// actions at every layer.
pub fn inner_dp_upper(
    model: &dyn Mdp,
    path: &SamplePath,
    ctx: &PenaltyContext<'_>,
    s0: StateId,
    a0: ActionId,
    rng: &mut dyn RngCore,
) -> Result<f64, BoundsError> {
    let steps = PathSteps::resolve(ctx, path.horizon(), rng)?;
    upper_with_steps(model, path, ctx, s0, a0, &steps)
}

/// Lower-bound inner DP at a single pair: evaluate the greedy policy of
/// `phi` along the path with the same penalties.
pub fn inner_dp_lower(
    model: &dyn Mdp,
    path: &SamplePath,
    ctx: &PenaltyContext<'_>,
    s0: StateId,
    a0: ActionId,
    rng: &mut dyn RngCore,
) -> Result<f64, BoundsError> {
    let steps = PathSteps::resolve(ctx, path.horizon(), rng)?;
    lower_with_steps(model, path, ctx, s0, a0, &steps)
}

/// Paired bounds from one path with shared per-step expectations, so the
/// ordering `upper >= lower` holds deterministically.
pub fn bound_pair(
    model: &dyn Mdp,
    path: &SamplePath,
    ctx: &PenaltyContext<'_>,
    s0: StateId,
    a0: ActionId,
    rng: &mut dyn RngCore,
) -> Result<BoundPair, BoundsError> {
    let steps = PathSteps::resolve(ctx, path.horizon(), rng)?;
    let upper = upper_with_steps(model, path, ctx, s0, a0, &steps)?;
    let lower = lower_with_steps(model, path, ctx, s0, a0, &steps)?;
    Ok(BoundPair { upper, lower })
}

fn upper_with_steps(
    model: &dyn Mdp,
    path: &SamplePath,
    ctx: &PenaltyContext<'_>,
    s0: StateId,
    a0: ActionId,
    steps: &PathSteps<'_>,
) -> Result<f64, BoundsError> {
    let tau = path.horizon();
    let noises = path.noises();
    let states = model.state_count();
    let actions = model.action_count();
    let gamma = model.discount();

    // forward pass: which states can the relaxed agent occupy at each time
    let mut layers: Vec<Vec<usize>> = Vec::with_capacity(tau);
    layers.push(vec![s0.0]);
    let mut mark = vec![false; states];
    for t in 0..tau - 1 {
        mark.iter_mut().for_each(|m| *m = false);
        let mut next_layer = Vec::new();
        for &s in &layers[t] {
            let s = StateId(s);
            let acts: Box<dyn Iterator<Item = ActionId>> = if t == 0 {
                Box::new(std::iter::once(a0))
            } else {
                Box::new(
                    (0..actions)
                        .map(ActionId)
                        .filter(move |a| model.is_feasible(s, *a)),
                )
            };
            for a in acts {
                let n = model.next_state(s, a, noises[t]).0;
                if !mark[n] {
                    mark[n] = true;
                    next_layer.push(n);
                }
            }
        }
        layers.push(next_layer);
    }

    // backward pass over the visited layers
    let mut current = vec![0.0f64; states];
    let mut following = vec![0.0f64; states];
    for t in (1..tau).rev() {
        let final_step = t == tau - 1;
        for &s in &layers[t] {
            let s = StateId(s);
            let mut best = f64::NEG_INFINITY;
            for a in 0..actions {
                let a = ActionId(a);
                if !model.is_feasible(s, a) {
                    continue;
                }
                let (e_phi, e_r) = ctx.pair_expectation(s, a, steps.at(t))?;
                let next = model.next_state(s, a, noises[t]).0;
                let (phi_next, cont) = if final_step {
                    (0.0, 0.0)
                } else {
                    (ctx.value[next], following[next])
                };
                let zeta = phi_next - gamma * e_phi;
                let q = e_r - zeta + cont;
                if q > best {
                    best = q;
                }
            }
            current[s.0] = best;
        }
        std::mem::swap(&mut current, &mut following);
    }

    let (e_phi, e_r) = ctx.pair_expectation(s0, a0, steps.at(0))?;
    let next = model.next_state(s0, a0, noises[0]).0;
    let (phi_next, cont) = if tau == 1 {
        (0.0, 0.0)
    } else {
        (ctx.value[next], following[next])
    };
    Ok(e_r - (phi_next - gamma * e_phi) + cont)
}

fn lower_with_steps(
    model: &dyn Mdp,
    path: &SamplePath,
    ctx: &PenaltyContext<'_>,
    s0: StateId,
    a0: ActionId,
    steps: &PathSteps<'_>,
) -> Result<f64, BoundsError> {
    let tau = path.horizon();
    let noises = path.noises();
    let gamma = model.discount();
    let mut total = 0.0;
    let mut s = s0;
    let mut a = a0;
    for (t, &w) in noises.iter().enumerate() {
        let final_step = t == tau - 1;
        let (e_phi, e_r) = ctx.pair_expectation(s, a, steps.at(t))?;
        let next = model.next_state(s, a, w);
        let phi_next = if final_step { 0.0 } else { ctx.value[next.0] };
        total += e_r - (phi_next - gamma * e_phi);
        s = next;
        a = ctx.greedy[s.0];
    }
    Ok(total)
}

/// Runs both backward recursions over every state-action pair at once,
/// returning the time-zero tables. Expectations per step are computed once
/// per pair and shared between the upper and lower tables, so
/// `upper >= lower` holds entrywise.
pub fn bound_tables(
    model: &dyn Mdp,
    path: &SamplePath,
    ctx: &PenaltyContext<'_>,
    rng: &mut dyn RngCore,
) -> Result<(QTable, QTable), BoundsError> {
    let tau = path.horizon();
    let noises = path.noises();
    let states = model.state_count();
    let actions = model.action_count();

    let steps = PathSteps::resolve(ctx, tau, rng)?;
    // shared modes reuse one materialized table; fresh batches need one per step
    let shared = match &steps {
        PathSteps::Shared(step) => Some(ctx.materialize(step)?),
        PathSteps::PerStep(_) => None,
    };

    let mut qu = QTable::zeros(states, actions);
    let mut ql = QTable::zeros(states, actions);
    let mut vu = vec![0.0f64; states];
    let mut vl = vec![0.0f64; states];
    let mut vu_next = vec![0.0f64; states];
    let mut vl_next = vec![0.0f64; states];

    for t in (0..tau).rev() {
        let final_step = t == tau - 1;
        let w = noises[t];
        let owned;
        // e_phi is already discount-folded by materialize
        let (e_phi, e_r) = match &shared {
            Some((p, r)) => (p.as_slice(), r.as_slice()),
            None => {
                owned = ctx.materialize(steps.at(t))?;
                (owned.0.as_slice(), owned.1.as_slice())
            }
        };
        for s in 0..states {
            let sid = StateId(s);
            for a in 0..actions {
                let idx = s * actions + a;
                let next = model.next_state(sid, ActionId(a), w).0;
                let (phi_next, cont_u, cont_l) = if final_step {
                    (0.0, 0.0, 0.0)
                } else {
                    (ctx.value[next], vu_next[next], vl_next[next])
                };
                let base = e_r[idx] - (phi_next - e_phi[idx]);
                qu.set(sid, ActionId(a), base + cont_u);
                ql.set(sid, ActionId(a), base + cont_l);
            }
        }
        if t > 0 {
            for s in 0..states {
                let sid = StateId(s);
                vu[s] = qu.state_value(model, sid);
                vl[s] = ql.get(sid, ctx.greedy[s]);
            }
            std::mem::swap(&mut vu, &mut vu_next);
            std::mem::swap(&mut vl, &mut vl_next);
        }
    }
    Ok((qu, ql))
}

/// Monte-Carlo bound estimate at one pair: averages paired bounds over
/// independently drawn paths.
pub struct McBounds {
    pub upper_mean: f64,
    pub lower_mean: f64,
    pub upper_stderr: f64,
    pub lower_stderr: f64,
    pub paths: usize,
}

pub fn mc_bound_estimate(
    model: &dyn Mdp,
    ctx: &PenaltyContext<'_>,
    s0: StateId,
    a0: ActionId,
    n_paths: usize,
    horizon_cap: usize,
    rng: &mut dyn RngCore,
) -> Result<McBounds, BoundsError> {
    assert!(n_paths >= 1, "need at least one path");
    let mut u_sum = 0.0;
    let mut u_sq = 0.0;
    let mut l_sum = 0.0;
    let mut l_sq = 0.0;
    for _ in 0..n_paths {
        let path = SamplePath::draw_from_model(model, horizon_cap, rng);
        let pair = bound_pair(model, &path, ctx, s0, a0, rng)?;
        u_sum += pair.upper;
        u_sq += pair.upper * pair.upper;
        l_sum += pair.lower;
        l_sq += pair.lower * pair.lower;
    }
    let n = n_paths as f64;
    let var = |sum: f64, sq: f64| ((sq - sum * sum / n) / (n - 1.0).max(1.0)).max(0.0);
    Ok(McBounds {
        upper_mean: u_sum / n,
        lower_mean: l_sum / n,
        upper_stderr: (var(u_sum, u_sq) / n).sqrt(),
        lower_stderr: (var(l_sum, l_sq) / n).sqrt(),
        paths: n_paths,
    })
}
