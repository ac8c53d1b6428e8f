//! Head-to-head training on the windy gridworld: the bounded learner
//! against the four baselines, summarized by first-crossing thresholds of
//! the relative error.
//!
//! Run with: `cargo run --release --example train_and_compare`

use lbql::harness::{run, time_to_thresholds, RunConfig, DEFAULT_THRESHOLDS};

fn main() {
    println!("windy gridworld, 30000 steps, 3 seeds, default schedules\n");
    println!("agent      n(50%)     n(20%)     n(5%)      n(1%)");
    for agent in ["lbql", "ql", "double-ql", "sql", "bcql"] {
        let mut cfg = RunConfig::new("wg").with_agent(agent);
        cfg.steps = 30_000;
        cfg.seeds = vec![0, 1, 2];
        let outcome = run(&cfg).unwrap();
        let entries = time_to_thresholds(&outcome.logs, &DEFAULT_THRESHOLDS).unwrap();
        let cells: Vec<String> = entries
            .iter()
            .map(|e| {
                e.steps
                    .map(|n| format!("{n:.0}"))
                    .unwrap_or_else(|| "-".into())
            })
            .collect();
        println!(
            "{agent:<10} {:<10} {:<10} {:<10} {:<10}",
            cells[0], cells[1], cells[2], cells[3]
        );
    }
}
