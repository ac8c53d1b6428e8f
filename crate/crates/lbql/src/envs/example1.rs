//! A two-state stochastic MDP driven by a fair coin.
//!
//! States `A` and `B` plus an absorbing terminal state. Actions `L` and `R`.
//! On heads the move succeeds in the chosen direction, on tails it bounces:
//!
//! - `(A, L)`: heads -> terminal with reward -1, tails -> stay at `A`, -1
//! - `(A, R)`: heads -> `B` with reward +1, tails -> stay at `A`, -1
//! - `(B, L)`: -> `A` with reward -1 under either outcome
//! - `(B, R)`: heads -> terminal with reward +1, tails -> stay at `B`, -1
//!
//! With the default discount 0.95 the optimal policy goes right everywhere:
//! Q*(A,R) = Q*(B,R) = 0 and Q*(A,L) = Q*(B,L) = -1.

use crate::mdp::{ActionId, DiscreteDistribution, Mdp, NoiseOutcome, StateId};

pub const STATE_A: StateId = StateId(0);
pub const STATE_B: StateId = StateId(1);
pub const TERMINAL: StateId = StateId(2);
pub const LEFT: ActionId = ActionId(0);
pub const RIGHT: ActionId = ActionId(1);
pub const HEADS: NoiseOutcome = NoiseOutcome(0);
pub const TAILS: NoiseOutcome = NoiseOutcome(1);

pub struct Example1 {
    gamma: f64,
    noise: DiscreteDistribution,
}

pub fn make_example1(gamma: Option<f64>) -> Example1 {
    Example1 {
        gamma: gamma.unwrap_or(0.95),
        noise: DiscreteDistribution::new(vec![HEADS, TAILS], vec![0.5, 0.5]).unwrap(),
    }
}

impl Example1 {
    fn transition(&self, s: StateId, a: ActionId, w: NoiseOutcome) -> (StateId, f64) {
        if s == TERMINAL {
            return (TERMINAL, 0.0);
        }
        let heads = w == HEADS;
        match (s, a) {
            (STATE_A, LEFT) => {
                if heads {
                    (TERMINAL, -1.0)
                } else {
                    (STATE_A, -1.0)
                }
            }
            (STATE_A, RIGHT) => {
                if heads {
                    (STATE_B, 1.0)
                } else {
                    (STATE_A, -1.0)
                }
            }
            (STATE_B, LEFT) => (STATE_A, -1.0),
            (STATE_B, RIGHT) => {
                if heads {
                    (TERMINAL, 1.0)
                } else {
                    (STATE_B, -1.0)
                }
            }
            _ => unreachable!("invalid state/action"),
        }
    }
}

impl Mdp for Example1 {
    fn name(&self) -> &str {
        "example1"
    }

    fn state_count(&self) -> usize {
        3
    }

    fn action_count(&self) -> usize {
        2
    }

    fn discount(&self) -> f64 {
        self.gamma
    }

    fn reward_bound(&self) -> f64 {
        1.0
    }

    fn start_state(&self) -> StateId {
        STATE_A
    }

    fn is_terminal(&self, s: StateId) -> bool {
        s == TERMINAL
    }

    fn next_state(&self, s: StateId, a: ActionId, w: NoiseOutcome) -> StateId {
        self.transition(s, a, w).0
    }

    fn realized_reward(&self, s: StateId, a: ActionId, w: NoiseOutcome) -> f64 {
        self.transition(s, a, w).1
    }

    fn expected_reward(&self, s: StateId, a: ActionId) -> f64 {
        0.5 * self.realized_reward(s, a, HEADS) + 0.5 * self.realized_reward(s, a, TAILS)
    }

    fn noise_support(&self) -> Option<&DiscreteDistribution> {
        Some(&self.noise)
    }
}
