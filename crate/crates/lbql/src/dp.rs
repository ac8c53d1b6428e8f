//! Ground-truth solver: synchronous Q-value iteration over any model with
//! enumerable noise, plus the greedy value extraction and the relative-error
//! metric used by the experiment harness.

use crate::mdp::{ActionId, Mdp, QTable, StateId, ValueTable};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DpError {
    #[error("model '{0}' has sampling-only noise; exact DP needs an enumerable support")]
    UnsupportedModel(String),
    #[error("no convergence after {iterations} sweeps (last residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("relative error undefined: reference value function has zero norm")]
    ZeroReference,
}

/// Result of value iteration with convergence diagnostics.
pub struct DpSolution {
    pub q: QTable,
    pub iterations: usize,
    /// Sup-norm distance between successive sweeps, one entry per sweep.
    pub residuals: Vec<f64>,
}

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITERS: usize = 1_000_000;

/// Solves the fixed point `Q = r + gamma E_w[max_b Q(f(s, a, w), b)]` by
/// synchronous sweeps, stopping once the sup-norm change drops to `tol`.
/// Terminal states are held at zero. The returned table then has Bellman
/// residual at most `gamma * tol <= tol`.
pub fn q_value_iteration(model: &dyn Mdp, tol: f64, max_iters: usize) -> Result<QTable, DpError> {
    q_value_iteration_detailed(model, tol, max_iters).map(|sol| sol.q)
}

pub fn q_value_iteration_detailed(
    model: &dyn Mdp,
    tol: f64,
    max_iters: usize,
) -> Result<DpSolution, DpError> {
    assert!(tol > 0.0, "tolerance must be positive");
    let support = model
        .noise_support()
        .ok_or_else(|| DpError::UnsupportedModel(model.name().to_string()))?;
    let states = model.state_count();
    let actions = model.action_count();
    let gamma = model.discount();

    // Enumerate the dynamics once; the sweeps then touch only dense arrays.
    let outcomes = support.len();
    let probs: Vec<f64> = support.iter().map(|(_, p)| p).collect();
    let mut next = vec![0u32; states * actions * outcomes];
    let mut reward = vec![0.0f64; states * actions];
    for s in 0..states {
        for a in 0..actions {
            reward[s * actions + a] = model.expected_reward(StateId(s), ActionId(a));
            for (k, (w, _)) in support.iter().enumerate() {
                next[(s * actions + a) * outcomes + k] =
                    model.next_state(StateId(s), ActionId(a), w).0 as u32;
            }
        }
    }
    let terminal: Vec<bool> = (0..states).map(|s| model.is_terminal(StateId(s))).collect();

    let mut q = QTable::zeros(states, actions);
    let mut values = vec![0.0f64; states];
    let mut residuals = Vec::new();
    for sweep in 0..max_iters {
        for s in 0..states {
            values[s] = if terminal[s] {
                0.0
            } else {
                q.state_value(model, StateId(s))
            };
        }
        let mut residual = 0.0f64;
        for s in 0..states {
            for a in 0..actions {
                let new = if terminal[s] {
                    0.0
                } else {
                    let base = (s * actions + a) * outcomes;
                    let mut expectation = 0.0;
                    for k in 0..outcomes {
                        expectation += probs[k] * values[next[base + k] as usize];
                    }
                    reward[s * actions + a] + gamma * expectation
                };
                let old = q.get(StateId(s), ActionId(a));
                residual = residual.max((new - old).abs());
                q.set(StateId(s), ActionId(a), new);
            }
        }
        residuals.push(residual);
        if residual <= tol {
            return Ok(DpSolution {
                q,
                iterations: sweep + 1,
                residuals,
            });
        }
    }
    Err(DpError::NoConvergence {
        iterations: max_iters,
        residual: residuals.last().copied().unwrap_or(f64::INFINITY),
    })
}

/// Sup-norm Bellman residual of a table, for self-certification.
pub fn bellman_residual(model: &dyn Mdp, q: &QTable) -> Result<f64, DpError> {
    let support = model
        .noise_support()
        .ok_or_else(|| DpError::UnsupportedModel(model.name().to_string()))?;
    let gamma = model.discount();
    let mut worst = 0.0f64;
    for s in 0..model.state_count() {
        let s = StateId(s);
        for a in 0..model.action_count() {
            let a = ActionId(a);
            let backed = if model.is_terminal(s) {
                0.0
            } else {
                let mut expectation = 0.0;
                for (w, p) in support.iter() {
                    let next = model.next_state(s, a, w);
                    let v = if model.is_terminal(next) {
                        0.0
                    } else {
                        q.state_value(model, next)
                    };
                    expectation += p * v;
                }
                model.expected_reward(s, a) + gamma * expectation
            };
            worst = worst.max((backed - q.get(s, a)).abs());
        }
    }
    Ok(worst)
}

/// Per-state `V(s) = max_a Q(s, a)` over feasible actions.
pub fn greedy_value(q: &QTable, model: &dyn Mdp) -> ValueTable {
    ValueTable(
        (0..q.states())
            .map(|s| q.state_value(model, StateId(s)))
            .collect(),
    )
}

/// Companion greedy policy, lowest action index on ties.
pub fn greedy_policy(q: &QTable, model: &dyn Mdp) -> Vec<ActionId> {
    (0..q.states())
        .map(|s| q.greedy_action(model, StateId(s)))
        .collect()
}

/// `||V_n - V*||_2 / ||V*||_2` with `V_n` the greedy value of `q`.
pub fn relative_error(q: &QTable, v_star: &ValueTable, model: &dyn Mdp) -> Result<f64, DpError> {
    let v = greedy_value(q, model);
    relative_error_values(&v, v_star)
}

pub fn relative_error_values(v: &ValueTable, v_star: &ValueTable) -> Result<f64, DpError> {
    let norm = v_star.l2_norm();
    if norm == 0.0 {
        return Err(DpError::ZeroReference);
    }
    let diff: f64 =
        v.0.iter()
            .zip(&v_star.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
    Ok(diff / norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs;
    use crate::mdp::{DiscreteDistribution, NoiseOutcome};

    /// Single-state, single-action chain with constant reward; closed-form
    /// fixed point r / (1 - gamma).
    struct Loop {
        gamma: f64,
        reward: f64,
        noise: DiscreteDistribution,
    }

    impl Mdp for Loop {
        fn name(&self) -> &str {
            "loop"
        }
        fn state_count(&self) -> usize {
            1
        }
        fn action_count(&self) -> usize {
            1
        }
        fn discount(&self) -> f64 {
            self.gamma
        }
        fn reward_bound(&self) -> f64 {
            self.reward.abs()
        }
        fn start_state(&self) -> StateId {
            StateId(0)
        }
        fn next_state(&self, s: StateId, _a: ActionId, _w: NoiseOutcome) -> StateId {
            s
        }
        fn realized_reward(&self, _s: StateId, _a: ActionId, _w: NoiseOutcome) -> f64 {
            self.reward
        }
        fn expected_reward(&self, _s: StateId, _a: ActionId) -> f64 {
            self.reward
        }
        fn noise_support(&self) -> Option<&DiscreteDistribution> {
            Some(&self.noise)
        }
    }

    fn single_loop(gamma: f64, reward: f64) -> Loop {
        Loop {
            gamma,
            reward,
            noise: DiscreteDistribution::uniform(1),
        }
    }

    #[test]
    fn example1_recovers_closed_form_optima() {
        let env = envs::by_name("example1").unwrap();
        let q = q_value_iteration(env.as_ref(), 1e-10, 100_000).unwrap();
        assert!((q.get(StateId(0), ActionId(1)) - 0.0).abs() < 1e-6); // (A, R)
        assert!((q.get(StateId(0), ActionId(0)) + 1.0).abs() < 1e-6); // (A, L)
        assert!((q.get(StateId(1), ActionId(1)) - 0.0).abs() < 1e-6); // (B, R)
        assert!((q.get(StateId(1), ActionId(0)) + 1.0).abs() < 1e-6); // (B, L)
        let v = greedy_value(&q, env.as_ref());
        assert!(v.get(StateId(0)).abs() < 1e-6);
        assert!(v.get(StateId(1)).abs() < 1e-6);
    }

    #[test]
    fn vanishing_discount_reduces_to_expected_reward() {
        let env = envs::by_name_with("wg", Some(1e-12)).unwrap();
        let q = q_value_iteration(env.as_ref(), 1e-13, 10_000).unwrap();
        for s in 0..env.state_count() {
            for a in 0..env.action_count() {
                let expect = if env.is_terminal(StateId(s)) {
                    0.0
                } else {
                    env.expected_reward(StateId(s), ActionId(a))
                };
                assert!((q.get(StateId(s), ActionId(a)) - expect).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn repositioning_solution_self_certifies() {
        let env = envs::by_name("2-cs-r").unwrap();
        let q = q_value_iteration(env.as_ref(), 1e-8, 1_000_000).unwrap();
        let residual = bellman_residual(env.as_ref(), &q).unwrap();
        assert!(residual <= 1e-8, "residual {residual}");
    }

    #[test]
    fn residuals_are_monotone_after_first_sweep() {
        let env = envs::by_name("2-cs").unwrap();
        let sol = q_value_iteration_detailed(env.as_ref(), 1e-9, 1_000_000).unwrap();
        for pair in sol.residuals.windows(2).skip(1) {
            assert!(pair[1] <= pair[0] + 1e-12, "residuals increased: {pair:?}");
        }
    }

    #[test]
    fn sampling_only_models_are_rejected() {
        let env = envs::by_name("4-cs").unwrap();
        assert!(matches!(
            q_value_iteration(env.as_ref(), 1e-8, 10),
            Err(DpError::UnsupportedModel(_))
        ));
    }

    #[test]
    fn max_iters_exceeded_reports_residual() {
        let env = envs::by_name("2-cs-r").unwrap();
        match q_value_iteration(env.as_ref(), 1e-12, 3) {
            Err(DpError::NoConvergence {
                iterations: 3,
                residual,
            }) => {
                assert!(residual > 0.0);
            }
            other => panic!("expected NoConvergence, got {other:?}", other = other.err()),
        }
    }

    #[test]
    fn greedy_value_handles_degenerate_tables() {
        let env = single_loop(0.5, 1.0);
        let q = q_value_iteration(&env, 1e-12, 10_000).unwrap();
        // single action: V(s) = Q(s, 0) = 1 / (1 - 0.5)
        let v = greedy_value(&q, &env);
        assert!((v.get(StateId(0)) - 2.0).abs() < 1e-9);

        let flat = QTable::filled(3, 4, -5.0);
        let env1 = envs::by_name("example1").unwrap();
        let _ = env1; // example1 has 2 actions; build a matching flat table instead
        let flat_v: Vec<f64> = (0..3)
            .map(|s| {
                flat.row(StateId(s))
                    .iter()
                    .cloned()
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        assert!(flat_v.iter().all(|&v| v == -5.0));
    }

    #[test]
    fn relative_error_matches_hand_values() {
        let env = single_loop(0.5, 1.0);
        // 2-state single-action toy values, checked against 4/5
        let v_star = ValueTable(vec![3.0, 4.0]);
        let v_n = ValueTable(vec![3.0, 0.0]);
        assert!((relative_error_values(&v_n, &v_star).unwrap() - 0.8).abs() < 1e-12);
        let doubled = ValueTable(vec![6.0, 8.0]);
        assert!((relative_error_values(&doubled, &v_star).unwrap() - 1.0).abs() < 1e-12);
        assert!((relative_error_values(&v_star, &v_star).unwrap()).abs() < 1e-12);

        let q = q_value_iteration(&env, 1e-12, 10_000).unwrap();
        let v = greedy_value(&q, &env);
        assert!(relative_error(&q, &v, &env).unwrap() < 1e-12);

        let zero = ValueTable(vec![0.0]);
        assert!(matches!(
            relative_error(&q, &zero, &env),
            Err(DpError::ZeroReference)
        ));
    }

    /// Relabeling the state space must not change the solution: synchronous
    /// sweeps are order-independent.
    #[test]
    fn solution_is_invariant_to_state_relabeling() {
        struct Permuted<M> {
            inner: M,
            perm: Vec<usize>,
            inv: Vec<usize>,
        }
        impl<M: Mdp> Mdp for Permuted<M> {
            fn name(&self) -> &str {
                "permuted"
            }
            fn state_count(&self) -> usize {
                self.inner.state_count()
            }
            fn action_count(&self) -> usize {
                self.inner.action_count()
            }
            fn discount(&self) -> f64 {
                self.inner.discount()
            }
            fn reward_bound(&self) -> f64 {
                self.inner.reward_bound()
            }
            fn start_state(&self) -> StateId {
                StateId(self.inv[self.inner.start_state().0])
            }
            fn is_terminal(&self, s: StateId) -> bool {
                self.inner.is_terminal(StateId(self.perm[s.0]))
            }
            fn next_state(&self, s: StateId, a: ActionId, w: NoiseOutcome) -> StateId {
                StateId(self.inv[self.inner.next_state(StateId(self.perm[s.0]), a, w).0])
            }
            fn realized_reward(&self, s: StateId, a: ActionId, w: NoiseOutcome) -> f64 {
                self.inner.realized_reward(StateId(self.perm[s.0]), a, w)
            }
            fn expected_reward(&self, s: StateId, a: ActionId) -> f64 {
                self.inner.expected_reward(StateId(self.perm[s.0]), a)
            }
            fn noise_support(&self) -> Option<&DiscreteDistribution> {
                self.inner.noise_support()
            }
        }

        let base = envs::make_windy_gridworld(None);
        let n = base.state_count();
        // deterministic shuffle
        let perm: Vec<usize> = (0..n).map(|i| (i * 37 + 11) % n).collect();
        let mut inv = vec![0; n];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        let permuted = Permuted {
            inner: envs::make_windy_gridworld(None),
            perm: perm.clone(),
            inv,
        };

        let q0 = q_value_iteration(&base, 1e-11, 1_000_000).unwrap();
        let q1 = q_value_iteration(&permuted, 1e-11, 1_000_000).unwrap();
        for (s, &p) in perm.iter().enumerate() {
            for a in 0..base.action_count() {
                let lhs = q0.get(StateId(p), ActionId(a));
                let rhs = q1.get(StateId(s), ActionId(a));
                assert!((lhs - rhs).abs() < 1e-9);
            }
        }
    }
}
