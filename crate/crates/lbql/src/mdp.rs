//! Core MDP abstraction in transition-function form, plus the shared numeric
//! primitives used throughout the crate: interval projection, the bounding
//! constant `rho = R_max / (1 - gamma)`, geometric horizon sampling, and the
//! polynomial learning/exploration schedules.
//!
//! Dynamics are written `s' = f(s, a, w)` with exogenous noise `w` drawn
//! i.i.d. from a per-model distribution, instead of explicit transition
//! probabilities. Rewards come in two flavours: the realized reward
//! `g(s, a, w)` observed by a learner, and the expected reward
//! `r(s, a) = E_w[g(s, a, w)]` used by exact solvers.

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a state in a finite model; valid iff `index < state_count`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(transparent)]
pub struct StateId(pub usize);

/// Index of an action; valid iff `index < action_count`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(transparent)]
pub struct ActionId(pub usize);

/// One element of a model's noise space, packed into a 64-bit code.
///
/// The owning environment decodes the code into its semantic payload (coin
/// face, wind delta, demand vector, demand-plus-destination draws). Codes are
/// opaque to everything outside the environment that produced them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(transparent)]
pub struct NoiseOutcome(pub u64);

#[derive(Debug, Error)]
pub enum MdpError {
    #[error("invalid interval: lo {lo} > hi {hi}")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
}

/// A finite distribution over noise outcomes.
///
/// Probabilities must be non-negative, sum to one within 1e-12, and outcomes
/// must be distinct.
#[derive(Debug, Clone)]
pub struct DiscreteDistribution {
    outcomes: Vec<NoiseOutcome>,
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(outcomes: Vec<NoiseOutcome>, probs: Vec<f64>) -> Result<Self, MdpError> {
        if outcomes.len() != probs.len() {
            return Err(MdpError::InvalidDistribution(format!(
                "{} outcomes vs {} probabilities",
                outcomes.len(),
                probs.len()
            )));
        }
        if outcomes.is_empty() {
            return Err(MdpError::InvalidDistribution("empty support".into()));
        }
        if probs.iter().any(|p| *p < 0.0 || !p.is_finite()) {
            return Err(MdpError::InvalidDistribution("negative probability".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(MdpError::InvalidDistribution(format!(
                "probabilities sum to {total}"
            )));
        }
        let mut seen = outcomes.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(MdpError::InvalidDistribution("duplicate outcome".into()));
        }
        Ok(Self { outcomes, probs })
    }

    /// Uniform distribution over `0..n` codes.
    pub fn uniform(n: u64) -> Self {
        let outcomes = (0..n).map(NoiseOutcome).collect();
        let probs = vec![1.0 / n as f64; n as usize];
        Self { outcomes, probs }
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NoiseOutcome, f64)> + '_ {
        self.outcomes
            .iter()
            .copied()
            .zip(self.probs.iter().copied())
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> NoiseOutcome {
        let u = uniform_unit(rng);
        let mut acc = 0.0;
        for (w, p) in self.iter() {
            acc += p;
            if u < acc {
                return w;
            }
        }
        *self.outcomes.last().expect("non-empty support")
    }
}

/// A finite MDP in transition-function form.
///
/// `next_state` and `realized_reward` must be total over
/// state x action x support, including state-infeasible actions (environments
/// with per-state feasibility clamp such actions to the nearest feasible one
/// so tables stay rectangular). Feasibility only restricts which actions a
/// policy may select.
pub trait Mdp: Send + Sync {
    /// Stable registry name, e.g. `"wg"`.
    fn name(&self) -> &str;
    fn state_count(&self) -> usize;
    fn action_count(&self) -> usize;
    /// Discount factor in (0, 1).
    fn discount(&self) -> f64;
    /// Uniform bound on |g(s, a, w)| and |r(s, a)|.
    fn reward_bound(&self) -> f64;
    fn start_state(&self) -> StateId;
    /// Terminal states self-loop with zero reward.
    fn is_terminal(&self, _s: StateId) -> bool {
        false
    }
    fn has_terminal(&self) -> bool {
        (0..self.state_count()).any(|s| self.is_terminal(StateId(s)))
    }
    fn is_feasible(&self, _s: StateId, _a: ActionId) -> bool {
        true
    }
    /// Transition function `f(s, a, w)`.
    fn next_state(&self, s: StateId, a: ActionId, w: NoiseOutcome) -> StateId;
    /// Realized reward `g(s, a, w)`.
    fn realized_reward(&self, s: StateId, a: ActionId, w: NoiseOutcome) -> f64;
    /// Expected reward `r(s, a) = E_w[g(s, a, w)]`.
    fn expected_reward(&self, s: StateId, a: ActionId) -> f64;
    /// Enumerable noise support, or `None` for sampling-only noise.
    fn noise_support(&self) -> Option<&DiscreteDistribution>;
    fn sample_noise(&self, rng: &mut dyn RngCore) -> NoiseOutcome {
        self.noise_support()
            .expect("model without enumerable support must override sample_noise")
            .sample(rng)
    }
    fn pair_count(&self) -> usize {
        self.state_count() * self.action_count()
    }
}

/// Dense (state x action) table of values.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    data: Vec<f64>,
    actions: usize,
}

impl QTable {
    pub fn zeros(states: usize, actions: usize) -> Self {
        Self {
            data: vec![0.0; states * actions],
            actions,
        }
    }

    pub fn filled(states: usize, actions: usize, value: f64) -> Self {
        Self {
            data: vec![value; states * actions],
            actions,
        }
    }

    pub fn for_model(model: &dyn Mdp, value: f64) -> Self {
        Self::filled(model.state_count(), model.action_count(), value)
    }

    pub fn states(&self) -> usize {
        self.data.len() / self.actions
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    #[inline]
    pub fn get(&self, s: StateId, a: ActionId) -> f64 {
        self.data[s.0 * self.actions + a.0]
    }

    #[inline]
    pub fn set(&mut self, s: StateId, a: ActionId, v: f64) {
        self.data[s.0 * self.actions + a.0] = v;
    }

    #[inline]
    pub fn row(&self, s: StateId) -> &[f64] {
        &self.data[s.0 * self.actions..(s.0 + 1) * self.actions]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `max_a Q(s, a)` over feasible actions.
    pub fn state_value(&self, model: &dyn Mdp, s: StateId) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for (a, &v) in self.row(s).iter().enumerate() {
            if model.is_feasible(s, ActionId(a)) && v > best {
                best = v;
            }
        }
        best
    }

    /// `argmax_a Q(s, a)` over feasible actions, lowest index on ties.
    pub fn greedy_action(&self, model: &dyn Mdp, s: StateId) -> ActionId {
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0;
        for (a, &v) in self.row(s).iter().enumerate() {
            if model.is_feasible(s, ActionId(a)) && v > best {
                best = v;
                arg = a;
            }
        }
        ActionId(arg)
    }
}

/// Dense per-state array of values.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable(pub Vec<f64>);

impl ValueTable {
    pub fn get(&self, s: StateId) -> f64 {
        self.0[s.0]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn l2_norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Visit counters nu(s, a) and nu(s), maintained together by an agent loop so
/// that nu(s) = sum_a nu(s, a).
#[derive(Debug, Clone)]
pub struct VisitCounts {
    per_pair: Vec<u64>,
    per_state: Vec<u64>,
    actions: usize,
}

impl VisitCounts {
    pub fn new(states: usize, actions: usize) -> Self {
        Self {
            per_pair: vec![0; states * actions],
            per_state: vec![0; states],
            actions,
        }
    }

    pub fn state(&self, s: StateId) -> u64 {
        self.per_state[s.0]
    }

    pub fn pair(&self, s: StateId, a: ActionId) -> u64 {
        self.per_pair[s.0 * self.actions + a.0]
    }

    pub fn visit_state(&mut self, s: StateId) -> u64 {
        self.per_state[s.0] += 1;
        self.per_state[s.0]
    }

    pub fn visit_pair(&mut self, s: StateId, a: ActionId) -> u64 {
        self.per_pair[s.0 * self.actions + a.0] += 1;
        self.per_pair[s.0 * self.actions + a.0]
    }
}

/// Projects `x` onto `[lo, hi]`; either endpoint may be infinite.
pub fn project_interval(x: f64, lo: f64, hi: f64) -> Result<f64, MdpError> {
    if lo > hi {
        return Err(MdpError::InvalidInterval { lo, hi });
    }
    Ok(x.min(hi).max(lo))
}

/// The bounding constant `rho = R_max / (1 - gamma)`; `|Q*| <= rho` entrywise.
pub fn rho_bound(model: &dyn Mdp) -> f64 {
    model.reward_bound() / (1.0 - model.discount())
}

/// Draws a horizon from the geometric distribution with parameter
/// `1 - gamma`, truncated at `cap`: `P(tau = k) = (1 - gamma) gamma^(k-1)`.
///
/// Inverse-transform sampling keeps this reproducible given the rng state.
pub fn sample_horizon(gamma: f64, rng: &mut dyn RngCore, cap: usize) -> usize {
    debug_assert!((0.0..1.0).contains(&gamma) && cap >= 1);
    let u = uniform_unit(rng);
    let tau = 1.0 + ((1.0 - u).ln() / gamma.ln()).floor();
    if tau.is_finite() && tau < cap as f64 {
        tau as usize
    } else {
        cap
    }
}

/// Polynomial learning rate `alpha = 1 / nu^r`, with the first-visit
/// convention that `nu = 0` yields 1.
pub fn learning_rate(visits: u64, exponent: f64) -> f64 {
    1.0 / (visits.max(1) as f64).powf(exponent)
}

/// Polynomial exploration rate `epsilon = 1 / nu^e`, same convention.
pub fn exploration_rate(visits: u64, exponent: f64) -> f64 {
    1.0 / (visits.max(1) as f64).powf(exponent)
}

/// Uniform draw in [0, 1) with 53-bit resolution.
pub(crate) fn uniform_unit(rng: &mut dyn RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn projection_clamps_and_passes_through() {
        assert_eq!(project_interval(2.0, -1.0, 1.0).unwrap(), 1.0);
        assert_eq!(project_interval(0.3, -1.0, 1.0).unwrap(), 0.3);
        // the upper-bound update form: U + beta (target - U)
        let x = 10.0 + 0.05 * (4.0 - 10.0);
        assert_eq!(project_interval(x, -20.0, f64::INFINITY).unwrap(), 9.7);
    }

    #[test]
    fn projection_rejects_inverted_interval() {
        assert!(matches!(
            project_interval(0.0, 1.0, -1.0),
            Err(MdpError::InvalidInterval { .. })
        ));
    }

    proptest! {
        #[test]
        fn projection_is_idempotent_and_monotone(
            x in -1e6f64..1e6, y in -1e6f64..1e6, lo in -1e3f64..0.0, hi in 0.0f64..1e3
        ) {
            let p = project_interval(x, lo, hi).unwrap();
            prop_assert_eq!(project_interval(p, lo, hi).unwrap(), p);
            let q = project_interval(y, lo, hi).unwrap();
            if x <= y {
                prop_assert!(p <= q);
            } else {
                prop_assert!(p >= q);
            }
        }
    }

    #[test]
    fn rates_follow_polynomial_schedule() {
        assert_eq!(learning_rate(4, 0.5), 0.5);
        assert_eq!(learning_rate(1, 0.73), 1.0);
        assert_eq!(exploration_rate(100, 0.5), 0.1);
        // first-visit convention
        assert_eq!(learning_rate(0, 0.5), 1.0);
        assert_eq!(exploration_rate(0, 0.9), 1.0);
    }

    #[test]
    fn horizon_is_one_when_absorption_is_certain() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100_000 {
            assert_eq!(sample_horizon(1e-9, &mut rng, 10_000), 1);
        }
    }

    #[test]
    fn horizon_reproducible_bit_for_bit() {
        let mut a = ChaCha8Rng::seed_from_u64(42);
        let mut b = ChaCha8Rng::seed_from_u64(42);
        let xs: Vec<usize> = (0..1000)
            .map(|_| sample_horizon(0.95, &mut a, 10_000))
            .collect();
        let ys: Vec<usize> = (0..1000)
            .map(|_| sample_horizon(0.95, &mut b, 10_000))
            .collect();
        assert_eq!(xs, ys);
    }

    #[test]
    fn horizon_mass_at_one_matches_geometric() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000usize;
        let ones = (0..n)
            .filter(|_| sample_horizon(0.95, &mut rng, 10_000) == 1)
            .count();
        let p = ones as f64 / n as f64;
        let sigma = (0.05f64 * 0.95 / n as f64).sqrt();
        assert!((p - 0.05).abs() < 3.0 * sigma, "p = {p}");
    }

    #[test]
    fn horizon_mean_matches_inverse_absorption_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let n = 1_000_000usize;
        let total: u64 = (0..n)
            .map(|_| sample_horizon(0.9, &mut rng, 10_000) as u64)
            .sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 10.0).abs() / 10.0 < 0.01, "mean = {mean}");
    }

    #[test]
    fn horizon_pmf_passes_chi_square() {
        // 30 head bins plus a tail bin, gamma = 0.95, 1e6 draws.
        let gamma: f64 = 0.95;
        let n = 1_000_000usize;
        let bins = 30usize;
        let mut counts = vec![0u64; bins + 1];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..n {
            let tau = sample_horizon(gamma, &mut rng, 10_000);
            counts[(tau - 1).min(bins)] += 1;
        }
        let mut stat = 0.0;
        for (k, &c) in counts.iter().enumerate() {
            let p = if k < bins {
                (1.0 - gamma) * gamma.powi(k as i32)
            } else {
                gamma.powi(bins as i32)
            };
            let expected = p * n as f64;
            stat += (c as f64 - expected).powi(2) / expected;
        }
        // chi-square critical value at 99% confidence, 30 degrees of freedom
        assert!(stat < 50.892, "chi-square statistic {stat}");
    }

    #[test]
    fn distribution_validation_catches_bad_inputs() {
        let ws = vec![NoiseOutcome(0), NoiseOutcome(1)];
        assert!(DiscreteDistribution::new(ws.clone(), vec![0.6, 0.6]).is_err());
        assert!(DiscreteDistribution::new(ws.clone(), vec![1.2, -0.2]).is_err());
        assert!(
            DiscreteDistribution::new(vec![NoiseOutcome(0), NoiseOutcome(0)], vec![0.5, 0.5])
                .is_err()
        );
        assert!(DiscreteDistribution::new(ws, vec![0.5, 0.5]).is_ok());
    }
}
