//! Full training run on the two-station pricing problem with the default
//! settings, writing the per-seed and aggregate CSVs and printing how the
//! mean bound gap narrows over training.
//!
//! Run with: `cargo run --release --example carshare_training`

use lbql::harness::{run, time_to_thresholds, write_aggregate_csv, write_run_csvs, RunConfig};
use std::path::Path;

fn main() {
    let mut cfg = RunConfig::new("2-cs");
    cfg.steps = 60_000;
    cfg.seeds = vec![0, 1, 2];
    let outcome = run(&cfg).unwrap();

    let log = &outcome.logs[0];
    let gaps = log.bound_gaps.as_ref().unwrap();
    println!("mean bound gap (seed 0):");
    for step in [1usize, 1000, 5000, 20000, 60000] {
        println!("  step {step:>6}: {:.1}", gaps[step - 1]);
    }

    let entries = time_to_thresholds(&outcome.logs, &[0.5, 0.2, 0.05, 0.01]).unwrap();
    println!("\nmean first crossings of the relative error:");
    for e in entries {
        let n = e
            .steps
            .map(|v| format!("{v:.0}"))
            .unwrap_or_else(|| "-".into());
        println!("  {:>4.0}%: step {n}", e.threshold * 100.0);
    }

    let dir = Path::new("out/carshare_training");
    write_run_csvs(&outcome, dir).unwrap();
    let agg = write_aggregate_csv(&outcome, dir).unwrap();
    println!("\nwrote CSVs next to {}", agg.display());
}
