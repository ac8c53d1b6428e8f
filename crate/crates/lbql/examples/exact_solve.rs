//! Exact Q-value iteration on the repositioning benchmark: solves to a
//! tight tolerance, self-certifies the Bellman residual, and prints the
//! optimal value and repositioning decision per inventory level.
//!
//! Run with: `cargo run --release --example exact_solve`

use lbql::dp::{bellman_residual, greedy_policy, greedy_value, q_value_iteration_detailed};
use lbql::envs;
use lbql::mdp::StateId;

fn main() {
    let env = envs::by_name("2-cs-r").unwrap();
    let model = env.as_ref();
    let sol = q_value_iteration_detailed(model, 1e-10, 1_000_000).unwrap();
    println!(
        "converged in {} sweeps; Bellman residual {:.2e}",
        sol.iterations,
        bellman_residual(model, &sol.q).unwrap()
    );

    let v = greedy_value(&sol.q, model);
    let policy = greedy_policy(&sol.q, model);
    println!("\ncars at station 1 | V*(s)      | reposition");
    for (s, action) in policy.iter().enumerate() {
        let r = action.0 as i64 - 12;
        println!("{:>17} | {:>10.2} | {:>+3}", s, v.get(StateId(s)), r);
    }
}
