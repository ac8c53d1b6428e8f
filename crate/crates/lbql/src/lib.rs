//! A tabular reinforcement-learning laboratory built around Q-learning with
//! lookahead bounds: Q-iterates are projected between stochastically averaged
//! upper and lower bounds obtained by solving sampled inner dynamic programs
//! with dual-feasible penalties.
//!
//! The crate ships:
//!
//! - [`mdp`]: the transition-function MDP abstraction and shared numeric
//!   primitives (projection, bounding constant, geometric horizons,
//!   polynomial schedules);
//! - [`envs`]: six benchmark environments (`example1`, `wg`, `sg`, `2-cs-r`,
//!   `2-cs`, `4-cs`);
//! - [`dp`]: the exact Q-value-iteration oracle and the relative-error
//!   metric;
//! - [`bounds`]: the duality engine — penalties, sample paths, and the
//!   backward inner-DP solvers producing paired upper/lower bound estimates;
//! - [`agents`]: the bounded learner in three variants plus four baselines
//!   (`ql`, `double-ql`, `sql`, `bcql`);
//! - [`harness`]: seeded multi-run experiments, CSV metrics, threshold
//!   reports, and sensitivity sweeps.
//!
//! The `lbql` binary exposes the harness as a small CLI (`run`, `solve`,
//! `bounds`, `sweep`, `report`); the `examples/` directory shows one runnable
//! program per major capability.

pub mod agents;
pub mod bounds;
pub mod dp;
pub mod envs;
pub mod harness;
pub mod mdp;
