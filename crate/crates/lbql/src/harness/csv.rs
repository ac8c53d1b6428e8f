//! CSV emission. Per-run files carry the fixed header
//! `run_id,step,reward,rel_error,mean_bound_gap,bounds_updated,wall_ms`;
//! disabled metrics serialize as empty fields. Aggregate files add
//! `_mean`/`_ci95` suffixed columns (normal-approximation intervals).
//! Output is a pure function of the logs, so identical runs produce
//! byte-identical files.

use super::{RunOutcome, SweepRow};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

pub const RUN_HEADER: &str = "run_id,step,reward,rel_error,mean_bound_gap,bounds_updated,wall_ms";

fn fmt_opt(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

fn file_stem(outcome: &RunOutcome) -> String {
    format!("{}_{}", outcome.config.env, outcome.config.agent)
}

/// One CSV per seed, named `<env>_<agent>_seed<k>.csv`. Returns the paths.
pub fn write_run_csvs(outcome: &RunOutcome, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for log in &outcome.logs {
        let path = dir.join(format!("{}_seed{}.csv", file_stem(outcome), log.seed));
        let mut text = String::with_capacity(log.rewards.len() * 32);
        text.push_str(RUN_HEADER);
        text.push('\n');
        for i in 0..log.rewards.len() {
            let _ = writeln!(
                text,
                "{},{},{},{},{},{},{}",
                log.seed,
                i + 1,
                log.rewards[i],
                fmt_opt(log.rel_errors.as_ref().map(|v| v[i])),
                fmt_opt(log.bound_gaps.as_ref().map(|v| v[i])),
                u8::from(log.bounds_updated[i]),
                fmt_opt(log.wall_ms.as_ref().map(|v| v[i])),
            );
        }
        std::fs::File::create(&path)?.write_all(text.as_bytes())?;
        paths.push(path);
    }
    Ok(paths)
}

fn mean_ci(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * var.sqrt() / n.sqrt())
}

/// Cross-seed aggregate: per-seed relative-error columns plus mean/ci95
/// columns for reward, relative error, and bound gap.
pub fn write_aggregate_csv(outcome: &RunOutcome, dir: &Path) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{}_aggregate.csv", file_stem(outcome)));
    let logs = &outcome.logs;
    let steps = logs.iter().map(|l| l.rewards.len()).min().unwrap_or(0);

    let mut header = String::from("step");
    for log in logs {
        let _ = write!(header, ",rel_error_run{}", log.seed);
    }
    header.push_str(",reward_mean,reward_ci95,rel_error_mean,rel_error_ci95");
    header.push_str(",mean_bound_gap_mean,mean_bound_gap_ci95");

    let mut text = header;
    text.push('\n');
    let mut scratch = Vec::with_capacity(logs.len());
    for i in 0..steps {
        let _ = write!(text, "{}", i + 1);
        for log in logs {
            let cell = fmt_opt(log.rel_errors.as_ref().map(|v| v[i]));
            let _ = write!(text, ",{cell}");
        }
        scratch.clear();
        scratch.extend(logs.iter().map(|l| l.rewards[i]));
        let (m, ci) = mean_ci(&scratch);
        let _ = write!(text, ",{m},{ci}");
        if logs.iter().all(|l| l.rel_errors.is_some()) {
            scratch.clear();
            scratch.extend(logs.iter().map(|l| l.rel_errors.as_ref().unwrap()[i]));
            let (m, ci) = mean_ci(&scratch);
            let _ = write!(text, ",{m},{ci}");
        } else {
            text.push_str(",,");
        }
        if logs.iter().all(|l| l.bound_gaps.is_some()) {
            scratch.clear();
            scratch.extend(logs.iter().map(|l| l.bound_gaps.as_ref().unwrap()[i]));
            let (m, ci) = mean_ci(&scratch);
            let _ = write!(text, ",{m},{ci}");
        } else {
            text.push_str(",,");
        }
        text.push('\n');
    }
    std::fs::File::create(&path)?.write_all(text.as_bytes())?;
    Ok(path)
}

/// Periodic performance file: trailing training reward and greedy-policy
/// return, averaged across seeds at each evaluation step.
pub fn write_perf_csv(outcome: &RunOutcome, dir: &Path) -> std::io::Result<Option<PathBuf>> {
    let logs = &outcome.logs;
    let points = logs.iter().map(|l| l.evals.len()).min().unwrap_or(0);
    if points == 0 {
        return Ok(None);
    }
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{}_perf.csv", file_stem(outcome)));
    let mut text = String::from(
        "step,reward_ma500_mean,reward_ma500_ci95,greedy_return_mean,greedy_return_ci95\n",
    );
    for i in 0..points {
        let step = logs[0].evals[i].0;
        let ma: Vec<f64> = logs.iter().map(|l| l.evals[i].1).collect();
        let greedy: Vec<f64> = logs.iter().map(|l| l.evals[i].2).collect();
        let (ma_m, ma_ci) = mean_ci(&ma);
        let (g_m, g_ci) = mean_ci(&greedy);
        let _ = writeln!(text, "{step},{ma_m},{ma_ci},{g_m},{g_ci}");
    }
    std::fs::File::create(&path)?.write_all(text.as_bytes())?;
    Ok(Some(path))
}

/// Sweep report: one row per `(agent, e, r)` cell; `-` marks thresholds a
/// cell never reached (or missing timing).
pub fn sweep_csv_text(rows: &[SweepRow], thresholds: &[f64]) -> String {
    let mut header = String::from("agent,e,r");
    for t in thresholds {
        let pct = t * 100.0;
        let _ = write!(header, ",n{pct}%,t{pct}%(s)");
    }
    let mut text = header;
    text.push('\n');
    for row in rows {
        let _ = write!(
            text,
            "{},{},{}",
            row.agent, row.explore_exponent, row.learn_exponent
        );
        for entry in &row.entries {
            let n = entry
                .steps
                .map(|v| v.to_string())
                .unwrap_or_else(|| "-".into());
            let t = entry
                .seconds
                .map(|v| v.to_string())
                .unwrap_or_else(|| "-".into());
            let _ = write!(text, ",{n},{t}");
        }
        text.push('\n');
    }
    text
}

pub fn write_sweep_csv(rows: &[SweepRow], thresholds: &[f64], path: &Path) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::File::create(path)?.write_all(sweep_csv_text(rows, thresholds).as_bytes())
}

/// Q table dump consumed by `load_q_csv`.
pub fn q_table_csv(q: &crate::mdp::QTable) -> String {
    let mut text = String::from("state,action,q\n");
    for s in 0..q.states() {
        for a in 0..q.actions() {
            let _ = writeln!(
                text,
                "{s},{a},{}",
                q.get(crate::mdp::StateId(s), crate::mdp::ActionId(a))
            );
        }
    }
    text
}
