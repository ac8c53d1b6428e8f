//! Small sensitivity sweep over the exploration and learning-rate
//! exponents on the two-station pricing problem (a desk-scale slice of the
//! full grid), printed as the threshold-report CSV.
//!
//! Run with: `cargo run --release --example sensitivity_sweep`

use lbql::harness::{sweep, sweep_csv_text, RunConfig};

fn main() {
    let mut base = RunConfig::new("2-cs");
    base.steps = 30_000;
    base.seeds = vec![0, 1, 2];

    let thresholds = [0.5, 0.2];
    let rows = sweep(
        &base,
        &["lbql", "ql"],
        &[0.5],
        &[0.5, 0.7, 0.9],
        &thresholds,
    )
    .unwrap();
    print!("{}", sweep_csv_text(&rows, &thresholds));
    println!("\n(dashes mark thresholds never reached within the step budget)");
}
