//! Two-station car-sharing benchmarks with a fleet of 12 vehicles. The state
//! is the number of cars at station 1; all rentals are one-way, so fulfilled
//! rentals from station 1 end at station 2 and vice versa. Unmet demand is
//! charged a lost-sales cost of 2 per unit at both stations.

use crate::mdp::{ActionId, DiscreteDistribution, Mdp, NoiseOutcome, StateId};

pub const FLEET: i64 = 12;

/// Repositioning: move `r` cars between the stations before demand realizes.
///
/// Actions encode `r = index - 12` over the fixed global set `{-12..12}`;
/// actions outside `[s - 12, s]` are masked as infeasible for state `s` (and
/// clamped into range when evaluated anyway, keeping tables rectangular).
/// Demands at the two stations are i.i.d. uniform on `{3..9}`, prices are
/// 3.5 and 4, repositioning costs 1 per car from station 1 to 2 and 1.5 the
/// other way.
pub struct CarshareRepositioning {
    gamma: f64,
    noise: DiscreteDistribution,
    expected: Vec<f64>,
    reward_bound: f64,
}

pub fn make_carshare_repositioning(gamma: Option<f64>) -> CarshareRepositioning {
    // codes 0..49 decode to (d1, d2) in {3..9}^2
    let noise = DiscreteDistribution::uniform(49);
    let mut env = CarshareRepositioning {
        gamma: gamma.unwrap_or(0.99),
        noise,
        expected: Vec::new(),
        reward_bound: 0.0,
    };
    let states = env.state_count();
    let actions = env.action_count();
    let mut expected = vec![0.0; states * actions];
    let mut bound = 0.0f64;
    for s in 0..states {
        for a in 0..actions {
            let mut mean = 0.0;
            for (w, p) in env.noise.iter() {
                let (_, g) = env.transition(StateId(s), ActionId(a), w);
                bound = bound.max(g.abs());
                mean += p * g;
            }
            expected[s * actions + a] = mean;
        }
    }
    env.expected = expected;
    env.reward_bound = bound;
    env
}

fn decode_uniform_pair(w: NoiseOutcome, low: i64) -> (i64, i64) {
    ((w.0 / 7) as i64 + low, (w.0 % 7) as i64 + low)
}

impl CarshareRepositioning {
    pub fn action_to_reposition(a: ActionId) -> i64 {
        a.0 as i64 - FLEET
    }

    fn transition(&self, s: StateId, a: ActionId, w: NoiseOutcome) -> (StateId, f64) {
        let s = s.0 as i64;
        // clamp keeps infeasible actions well-defined without growing the fleet
        let r = Self::action_to_reposition(a).clamp(s - FLEET, s);
        let (d1, d2) = decode_uniform_pair(w, 3);
        let at1 = s - r;
        let at2 = FLEET - at1;
        let w1 = d1.min(at1);
        let w2 = d2.min(at2);
        let reward = 3.5 * w1 as f64 + 4.0 * w2 as f64
            - 2.0 * (d1 - w1) as f64
            - 2.0 * (d2 - w2) as f64
            - 1.0 * r.max(0) as f64
            + 1.5 * r.min(0) as f64;
        (StateId((at1 + w2 - w1) as usize), reward)
    }
}

impl Mdp for CarshareRepositioning {
    fn name(&self) -> &str {
        "2-cs-r"
    }

    fn state_count(&self) -> usize {
        FLEET as usize + 1
    }

    fn action_count(&self) -> usize {
        2 * FLEET as usize + 1
    }

    fn discount(&self) -> f64 {
        self.gamma
    }

    fn reward_bound(&self) -> f64 {
        self.reward_bound
    }

    fn start_state(&self) -> StateId {
        StateId(FLEET as usize / 2)
    }

    fn is_feasible(&self, s: StateId, a: ActionId) -> bool {
        let r = Self::action_to_reposition(a);
        s.0 as i64 - FLEET <= r && r <= s.0 as i64
    }

    fn next_state(&self, s: StateId, a: ActionId, w: NoiseOutcome) -> StateId {
        self.transition(s, a, w).0
    }

    fn realized_reward(&self, s: StateId, a: ActionId, w: NoiseOutcome) -> f64 {
        self.transition(s, a, w).1
    }

    fn expected_reward(&self, s: StateId, a: ActionId) -> f64 {
        self.expected[s.0 * self.action_count() + a.0]
    }

    fn noise_support(&self) -> Option<&DiscreteDistribution> {
        Some(&self.noise)
    }
}

/// Pricing: set a price at each station, inducing stochastic demand.
///
/// Actions are the discretized expected-demand pairs `(d1, d2)` in
/// `{3..8} x {3..9}`, recovering prices through the linear demand curves
/// `p1 = 9 - d1` and `p2 = 10 - d2`. Realized demand adds an i.i.d. uniform
/// `{-3..3}` shock per station.
pub struct CarsharePricing2 {
    gamma: f64,
    noise: DiscreteDistribution,
    expected: Vec<f64>,
    reward_bound: f64,
}

pub fn make_carshare_pricing_2(gamma: Option<f64>) -> CarsharePricing2 {
    // codes 0..49 decode to (eps1, eps2) in {-3..3}^2
    let noise = DiscreteDistribution::uniform(49);
    let mut env = CarsharePricing2 {
        gamma: gamma.unwrap_or(0.95),
        noise,
        expected: Vec::new(),
        reward_bound: 0.0,
    };
    let states = env.state_count();
    let actions = env.action_count();
    let mut expected = vec![0.0; states * actions];
    let mut bound = 0.0f64;
    for s in 0..states {
        for a in 0..actions {
            let mut mean = 0.0;
            for (w, p) in env.noise.iter() {
                let (_, g) = env.transition(StateId(s), ActionId(a), w);
                bound = bound.max(g.abs());
                mean += p * g;
            }
            expected[s * actions + a] = mean;
        }
    }
    env.expected = expected;
    env.reward_bound = bound;
    env
}

impl CarsharePricing2 {
    pub fn action_to_demands(a: ActionId) -> (i64, i64) {
        (3 + (a.0 / 7) as i64, 3 + (a.0 % 7) as i64)
    }

    fn transition(&self, s: StateId, a: ActionId, w: NoiseOutcome) -> (StateId, f64) {
        let s = s.0 as i64;
        let (d1, d2) = Self::action_to_demands(a);
        let (e1, e2) = decode_uniform_pair(w, -3);
        let p1 = (9 - d1) as f64;
        let p2 = (10 - d2) as f64;
        let dem1 = d1 + e1;
        let dem2 = d2 + e2;
        let w1 = dem1.min(s);
        let w2 = dem2.min(FLEET - s);
        let reward =
            p1 * w1 as f64 + p2 * w2 as f64 - 2.0 * (dem1 - w1) as f64 - 2.0 * (dem2 - w2) as f64;
        (StateId((s - w1 + w2) as usize), reward)
    }
}

impl Mdp for CarsharePricing2 {
    fn name(&self) -> &str {
        "2-cs"
    }

    fn state_count(&self) -> usize {
        FLEET as usize + 1
    }

    fn action_count(&self) -> usize {
        42
    }

    fn discount(&self) -> f64 {
        self.gamma
    }

    fn reward_bound(&self) -> f64 {
        self.reward_bound
    }

    fn start_state(&self) -> StateId {
        StateId(FLEET as usize / 2)
    }

    fn next_state(&self, s: StateId, a: ActionId, w: NoiseOutcome) -> StateId {
        self.transition(s, a, w).0
    }

    fn realized_reward(&self, s: StateId, a: ActionId, w: NoiseOutcome) -> f64 {
        self.transition(s, a, w).1
    }

    fn expected_reward(&self, s: StateId, a: ActionId) -> f64 {
        self.expected[s.0 * self.action_count() + a.0]
    }

    fn noise_support(&self) -> Option<&DiscreteDistribution> {
        Some(&self.noise)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn demand_code(d1: i64, d2: i64) -> NoiseOutcome {
        NoiseOutcome(((d1 - 3) * 7 + (d2 - 3)) as u64)
    }

    fn shock_code(e1: i64, e2: i64) -> NoiseOutcome {
        NoiseOutcome(((e1 + 3) * 7 + (e2 + 3)) as u64)
    }

    #[test]
    fn repositioning_hand_example() {
        let env = make_carshare_repositioning(None);
        // s = 6, r = 2, demands (5, 9): fulfilled (4, 8), reward 40, next 8
        let a = ActionId((2 + FLEET) as usize);
        let w = demand_code(5, 9);
        assert_eq!(env.realized_reward(StateId(6), a, w), 40.0);
        assert_eq!(env.next_state(StateId(6), a, w), StateId(8));
    }

    #[test]
    fn empty_station_cannot_reposition_outward() {
        let env = make_carshare_repositioning(None);
        for a in 0..env.action_count() {
            let r = CarshareRepositioning::action_to_reposition(ActionId(a));
            assert_eq!(env.is_feasible(StateId(0), ActionId(a)), r <= 0);
            assert_eq!(env.is_feasible(StateId(12), ActionId(a)), r >= 0);
        }
    }

    #[test]
    fn pricing_hand_example() {
        let env = make_carshare_pricing_2(None);
        // s = 6, (d1, d2) = (5, 5), no shocks: prices (4, 5), reward 45, stay
        let a = ActionId((5 - 3) * 7 + (5 - 3));
        assert_eq!(CarsharePricing2::action_to_demands(a), (5, 5));
        let w = shock_code(0, 0);
        assert_eq!(env.realized_reward(StateId(6), a, w), 45.0);
        assert_eq!(env.next_state(StateId(6), a, w), StateId(6));
    }

    #[test]
    fn pricing_station_two_empty_when_all_cars_at_one() {
        let env = make_carshare_pricing_2(None);
        // with all 12 cars at station 1 nothing can be rented at station 2,
        // so every unit of station-2 demand is lost
        for a in 0..env.action_count() {
            let (d1, d2) = CarsharePricing2::action_to_demands(ActionId(a));
            for (w, _) in env.noise.iter() {
                let (e1, e2) = decode_uniform_pair(w, -3);
                let w1 = (d1 + e1).min(12);
                let p1 = (9 - d1) as f64;
                let expected =
                    p1 * w1 as f64 - 2.0 * (d1 + e1 - w1) as f64 - 2.0 * (d2 + e2) as f64;
                assert_eq!(env.realized_reward(StateId(12), ActionId(a), w), expected);
                assert_eq!(
                    env.next_state(StateId(12), ActionId(a), w).0,
                    (12 - w1) as usize
                );
            }
        }
    }

    proptest! {
        #[test]
        fn repositioning_states_stay_in_range(s in 0usize..13, a in 0usize..25, w in 0u64..49) {
            let env = make_carshare_repositioning(None);
            let next = env.next_state(StateId(s), ActionId(a), NoiseOutcome(w));
            prop_assert!(next.0 <= 12);
        }

        #[test]
        fn pricing_states_stay_in_range(s in 0usize..13, a in 0usize..42, w in 0u64..49) {
            let env = make_carshare_pricing_2(None);
            let next = env.next_state(StateId(s), ActionId(a), NoiseOutcome(w));
            prop_assert!(next.0 <= 12);
        }
    }
}
