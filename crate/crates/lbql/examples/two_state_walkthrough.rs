//! Walkthrough of the bounded learner on the two-state coin MDP.
//!
//! Trains the idealized variant with constant stepsizes and prints the
//! Q / Q' iterates together with the tracked lower/upper bounds every few
//! hundred steps, ending with the distance to the exact optimum.
//!
//! Run with: `cargo run --release --example two_state_walkthrough`

use lbql::agents::{Agent, Hyperparams, InitMode, LbqlAgent, LbqlVariant, Schedule};
use lbql::dp::q_value_iteration;
use lbql::envs;
use lbql::harness::default_hyperparams;
use lbql::mdp::{ActionId, StateId};

fn main() {
    let env = envs::by_name("example1").unwrap();
    let q_star = q_value_iteration(env.as_ref(), 1e-10, 1_000_000).unwrap();

    let hp = Hyperparams {
        learning: Schedule::Constant { value: 0.1 },
        beta: Schedule::Constant { value: 0.05 },
        init: InitMode::Zero,
        ..default_hyperparams("example1")
    };
    let mut agent = LbqlAgent::new(env.clone(), hp, LbqlVariant::Idealized, 0);

    let names = [("A", StateId(0)), ("B", StateId(1))];
    let actions = [("L", ActionId(0)), ("R", ActionId(1))];
    println!("exact optimum: Q*(A,R) = Q*(B,R) = 0, Q*(A,L) = Q*(B,L) = -1");
    println!("initial envelope: L = -20, U = +20 everywhere\n");

    for step in 1..=3000u32 {
        agent.step();
        if [100, 300, 1000, 3000].contains(&step) {
            println!("after {step} steps:");
            println!("  pair      L        Q'       U");
            for (sn, s) in names {
                for (an, a) in actions {
                    println!(
                        "  ({sn},{an})  {:8.3} {:8.3} {:8.3}",
                        agent.lower().get(s, a),
                        agent.q_prime().get(s, a),
                        agent.upper().get(s, a),
                    );
                }
            }
            let mut worst = 0.0f64;
            for &(_, s) in &names {
                for &(_, a) in &actions {
                    worst = worst.max((agent.q_prime().get(s, a) - q_star.get(s, a)).abs());
                }
            }
            println!("  max |Q' - Q*| = {worst:.4}\n");
        }
    }
}
