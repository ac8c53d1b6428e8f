//! Benchmark environments, each exposed as an immutable [`Mdp`] value object
//! and registered under a stable name for CLI and config use:
//! `example1`, `wg`, `sg`, `2-cs-r`, `2-cs`, `4-cs`.

mod carshare;
mod carshare4;
mod example1;
mod gridworld;

pub use carshare::{make_carshare_pricing_2, make_carshare_repositioning};
pub use carshare4::make_carshare_pricing_4;
pub use example1::make_example1;
pub use gridworld::{make_stormy_gridworld, make_windy_gridworld, StormyConfig};

use crate::mdp::Mdp;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
#[error("unknown environment '{0}' (expected one of: example1, wg, sg, 2-cs-r, 2-cs, 4-cs)")]
pub struct UnknownEnv(pub String);

pub const ENV_NAMES: [&str; 6] = ["example1", "wg", "sg", "2-cs-r", "2-cs", "4-cs"];

/// Builds an environment by registry name with its default discount.
pub fn by_name(name: &str) -> Result<Arc<dyn Mdp>, UnknownEnv> {
    by_name_with(name, None)
}

/// Builds an environment by registry name, optionally overriding the
/// discount factor.
pub fn by_name_with(name: &str, gamma: Option<f64>) -> Result<Arc<dyn Mdp>, UnknownEnv> {
    let env: Arc<dyn Mdp> = match name {
        "example1" => Arc::new(make_example1(gamma)),
        "wg" => Arc::new(make_windy_gridworld(gamma)),
        "sg" => Arc::new(make_stormy_gridworld(gamma, StormyConfig::default())),
        "2-cs-r" => Arc::new(make_carshare_repositioning(gamma)),
        "2-cs" => Arc::new(make_carshare_pricing_2(gamma)),
        "4-cs" => Arc::new(make_carshare_pricing_4(gamma)),
        other => return Err(UnknownEnv(other.to_string())),
    };
    Ok(env)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{ActionId, NoiseOutcome, StateId};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Shared sanity sweep: support sums to one, f lands in range, rewards
    /// respect the bound, and expected reward matches the enumeration.
    #[test]
    fn enumerable_environments_are_consistent() {
        for name in ["example1", "wg", "sg", "2-cs-r", "2-cs"] {
            let env = by_name(name).unwrap();
            let support = env.noise_support().expect(name);
            let total: f64 = support.iter().map(|(_, p)| p).sum();
            assert!((total - 1.0).abs() < 1e-12, "{name}: support mass {total}");
            for s in 0..env.state_count() {
                let s = StateId(s);
                for a in 0..env.action_count() {
                    let a = ActionId(a);
                    let mut mean = 0.0;
                    for (w, p) in support.iter() {
                        let next = env.next_state(s, a, w);
                        assert!(next.0 < env.state_count(), "{name}: f out of range");
                        let g = env.realized_reward(s, a, w);
                        assert!(
                            g.abs() <= env.reward_bound() + 1e-12,
                            "{name}: |g| = {} > bound {}",
                            g.abs(),
                            env.reward_bound()
                        );
                        mean += p * g;
                    }
                    let r = env.expected_reward(s, a);
                    assert!(
                        (r - mean).abs() < 1e-9,
                        "{name}: r({},{}) = {r} but enumeration gives {mean}",
                        s.0,
                        a.0
                    );
                    assert!(r.abs() <= env.reward_bound() + 1e-12);
                }
            }
        }
    }

    #[test]
    fn terminal_states_self_loop_with_zero_reward() {
        for name in ["example1", "wg", "sg"] {
            let env = by_name(name).unwrap();
            let support = env.noise_support().unwrap();
            for s in 0..env.state_count() {
                let s = StateId(s);
                if !env.is_terminal(s) {
                    continue;
                }
                for a in 0..env.action_count() {
                    for (w, _) in support.iter() {
                        assert_eq!(env.next_state(s, ActionId(a), w), s);
                        assert_eq!(env.realized_reward(s, ActionId(a), w), 0.0);
                    }
                }
            }
        }
        for name in ["2-cs-r", "2-cs", "4-cs"] {
            assert!(
                !by_name(name).unwrap().has_terminal(),
                "{name} has no terminal"
            );
        }
    }

    #[test]
    fn sampling_matches_support_distribution() {
        let env = by_name("example1").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let heads = (0..n)
            .filter(|_| env.sample_noise(&mut rng) == NoiseOutcome(0))
            .count();
        let p = heads as f64 / n as f64;
        assert!((p - 0.5).abs() < 0.01, "p = {p}");
    }
}
