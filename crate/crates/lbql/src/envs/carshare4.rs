//! Four-station car-sharing pricing with a fleet of 20 vehicles and both
//! one-way and return trips.
//!
//! The state is the vector of cars per station (1771 compositions of 20 into
//! 4 parts); actions are expected-demand vectors in `{3, 4}^4` (16 actions).
//! Two sources of randomness drive a step: per-station demand shocks, i.i.d.
//! uniform on `{-3..3}`, and the destinations of fulfilled rentals, each
//! uniform over the 4 stations.
//!
//! A noise outcome packs the shock vector together with a 52-bit seed for the
//! destination-draw stream, so `w` stays independent of `(s, a)`: a step
//! consumes only the first `omega_i` destination draws per station. The
//! enumerated support is astronomically large, so this environment is
//! sampling-only — `noise_support()` returns `None`, and exact-expectation
//! penalties and exact DP refuse it.

use crate::mdp::{ActionId, DiscreteDistribution, Mdp, NoiseOutcome, StateId};
use rand::{Rng, RngCore};

pub const STATIONS: usize = 4;
pub const FLEET: i64 = 20;
const SHOCK_CODES: u64 = 2401; // 7^4

/// Lost-sales cost per unit of unmet demand.
const LOST_SALES: [f64; STATIONS] = [1.7, 1.2, 1.5, 2.0];
/// Price intercepts of the linear demand curves `p_i = c_i - d_i`.
const PRICE_INTERCEPT: [i64; STATIONS] = [9, 10, 9, 10];
/// Symmetric trip distances, `l[i][j]`, with unit-length return trips.
const DISTANCE: [[f64; STATIONS]; STATIONS] = [
    [1.0, 1.8, 1.5, 1.4],
    [1.8, 1.0, 1.6, 1.1],
    [1.5, 1.6, 1.2, 1.2],
    [1.4, 1.1, 1.2, 1.0],
];

pub struct CarsharePricing4 {
    gamma: f64,
    states: Vec<[u8; STATIONS]>,
    index: Vec<u16>, // packed (s1, s2, s3) -> state index + 1, 0 = invalid
    reward_bound: f64,
}

pub fn make_carshare_pricing_4(gamma: Option<f64>) -> CarsharePricing4 {
    let mut states = Vec::new();
    let mut index = vec![0u16; 21 * 21 * 21];
    for s1 in 0..=FLEET {
        for s2 in 0..=FLEET - s1 {
            for s3 in 0..=FLEET - s1 - s2 {
                let s4 = FLEET - s1 - s2 - s3;
                index[(s1 * 21 * 21 + s2 * 21 + s3) as usize] = states.len() as u16 + 1;
                states.push([s1 as u8, s2 as u8, s3 as u8, s4 as u8]);
            }
        }
    }
    // revenue is bounded by the dearest price times the longest trip for the
    // at most 7 rentals a station can fulfil, lost sales by rho_i * 7
    let max_revenue: f64 = (0..STATIONS)
        .map(|i| {
            let max_price = (PRICE_INTERCEPT[i] - 3) as f64;
            let max_distance = DISTANCE[i].iter().cloned().fold(0.0, f64::max);
            max_price * max_distance * 7.0
        })
        .sum();
    let max_lost: f64 = LOST_SALES.iter().map(|c| c * 7.0).sum();
    CarsharePricing4 {
        gamma: gamma.unwrap_or(0.95),
        states,
        index,
        reward_bound: max_revenue.max(max_lost),
    }
}

/// Decoded payload of one noise outcome.
pub struct Draws {
    shocks: [i64; STATIONS],
    seed: u64,
}

impl Draws {
    /// Destination of the `k`-th fulfilled rental at station `i`, uniform
    /// over the four stations. Draws come from a splitmix stream keyed by the
    /// outcome's seed, so they are deterministic per outcome.
    #[inline]
    pub fn destination(&self, station: usize, k: i64) -> usize {
        let t = station as u64 * FLEET as u64 + k as u64;
        let word = splitmix(self.seed.wrapping_add(1 + t / 32));
        ((word >> (2 * (t % 32))) & 3) as usize
    }

    pub fn shock(&self, station: usize) -> i64 {
        self.shocks[station]
    }
}

#[inline]
fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D049BB133111EB);
    x ^ (x >> 31)
}

impl CarsharePricing4 {
    pub fn decode(&self, w: NoiseOutcome) -> Draws {
        let mut code = w.0 & 0xFFF;
        let mut shocks = [0i64; STATIONS];
        for s in shocks.iter_mut() {
            *s = (code % 7) as i64 - 3;
            code /= 7;
        }
        Draws {
            shocks,
            seed: w.0 >> 12,
        }
    }

    pub fn encode(shocks: [i64; STATIONS], seed: u64) -> NoiseOutcome {
        let mut code = 0u64;
        for s in shocks.iter().rev() {
            code = code * 7 + (s + 3) as u64;
        }
        NoiseOutcome(code | (seed << 12))
    }

    pub fn state_vector(&self, s: StateId) -> [u8; STATIONS] {
        self.states[s.0]
    }

    pub fn state_index(&self, v: [i64; STATIONS]) -> StateId {
        let key = (v[0] * 21 * 21 + v[1] * 21 + v[2]) as usize;
        StateId(self.index[key] as usize - 1)
    }

    pub fn action_demands(a: ActionId) -> [i64; STATIONS] {
        let mut d = [0i64; STATIONS];
        for (i, di) in d.iter_mut().enumerate() {
            *di = 3 + ((a.0 >> i) & 1) as i64;
        }
        d
    }

    fn transition(&self, s: StateId, a: ActionId, draws: &Draws) -> (StateId, f64) {
        let stock = self.states[s.0];
        let demands = Self::action_demands(a);
        let mut reward = 0.0;
        let mut next = [0i64; STATIONS];
        for i in 0..STATIONS {
            next[i] += stock[i] as i64;
        }
        for i in 0..STATIONS {
            let demand = (demands[i] + draws.shock(i)).max(0);
            let fulfilled = demand.min(stock[i] as i64);
            let price = (PRICE_INTERCEPT[i] - demands[i]) as f64;
            for k in 0..fulfilled {
                let j = draws.destination(i, k);
                reward += price * DISTANCE[i][j];
                next[j] += 1;
            }
            next[i] -= fulfilled;
            reward -= LOST_SALES[i] * (demand - fulfilled) as f64;
        }
        (self.state_index(next), reward)
    }
}

impl Mdp for CarsharePricing4 {
    fn name(&self) -> &str {
        "4-cs"
    }

    fn state_count(&self) -> usize {
        self.states.len()
    }

    fn action_count(&self) -> usize {
        16
    }

    fn discount(&self) -> f64 {
        self.gamma
    }

    fn reward_bound(&self) -> f64 {
        self.reward_bound
    }

    fn start_state(&self) -> StateId {
        self.state_index([5, 5, 5, 5])
    }

    fn next_state(&self, s: StateId, a: ActionId, w: NoiseOutcome) -> StateId {
        self.transition(s, a, &self.decode(w)).0
    }

    fn realized_reward(&self, s: StateId, a: ActionId, w: NoiseOutcome) -> f64 {
        self.transition(s, a, &self.decode(w)).1
    }

    /// Closed form: destinations are uniform, so the expected revenue per
    /// fulfilled rental at station `i` is the price times the mean distance,
    /// and `E[omega_i]` averages the seven equally likely shocks.
    fn expected_reward(&self, s: StateId, a: ActionId) -> f64 {
        let stock = self.states[s.0];
        let demands = Self::action_demands(a);
        let mut reward = 0.0;
        for i in 0..STATIONS {
            let mean_distance: f64 = DISTANCE[i].iter().sum::<f64>() / STATIONS as f64;
            let price = (PRICE_INTERCEPT[i] - demands[i]) as f64;
            for eps in -3..=3 {
                let demand = (demands[i] + eps).max(0);
                let fulfilled = demand.min(stock[i] as i64);
                reward += (price * mean_distance * fulfilled as f64
                    - LOST_SALES[i] * (demand - fulfilled) as f64)
                    / 7.0;
            }
        }
        reward
    }

    fn noise_support(&self) -> Option<&DiscreteDistribution> {
        None
    }

    fn sample_noise(&self, rng: &mut dyn RngCore) -> NoiseOutcome {
        let shock_code = rng.gen_range(0..SHOCK_CODES);
        let seed = rng.next_u64() >> 12;
        NoiseOutcome(shock_code | (seed << 12))
    }
}
