//! Command-line front end for the experiment harness.
//!
//! Subcommands: `run` (train + metrics), `solve` (exact DP cache), `bounds`
//! (Monte-Carlo bound evaluation), `sweep` (threshold grid), `report`
//! (thresholds from run CSVs). Exit codes: 0 success, 2 configuration
//! error, 3 unsupported metric, 1 anything else.

use clap::{Args, Parser, Subcommand};
use lbql::agents::AGENT_NAMES;
use lbql::bounds::{mc_bound_estimate, ExpectationMode, PenaltyContext};
use lbql::dp;
use lbql::envs::{self, ENV_NAMES};
use lbql::harness::{
    self, load_q_csv, q_table_csv, sweep_csv_text, time_to_thresholds, write_aggregate_csv,
    write_perf_csv, write_run_csvs, write_sweep_csv, HarnessError, RunConfig, SeedLog,
    DEFAULT_THRESHOLDS,
};
use lbql::mdp::{ActionId, Mdp, QTable, StateId};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "lbql",
    version,
    about = "Tabular Q-learning with lookahead bounds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent and write per-seed and aggregate metric CSVs.
    Run(RunArgs),
    /// Solve a model by exact Q-value iteration and cache the tables.
    Solve(SolveArgs),
    /// Estimate Monte-Carlo upper/lower bounds for a penalty table.
    Bounds(BoundsArgs),
    /// Train a grid of (agent, e, r) cells and report threshold crossings.
    Sweep(SweepArgs),
    /// Summarize first-crossing thresholds from existing run CSVs.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Environment name.
    #[arg(long, value_parser = ENV_NAMES)]
    env: Option<String>,
    /// Agent name.
    #[arg(long, value_parser = AGENT_NAMES)]
    agent: Option<String>,
    #[arg(long)]
    steps: Option<u64>,
    /// Comma-separated seed list, e.g. `0,1,2`.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for CSVs.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Cached Q* CSV (from `solve`) instead of re-solving.
    #[arg(long)]
    qstar: Option<PathBuf>,
    /// Discount override.
    #[arg(long)]
    gamma: Option<f64>,
    /// Enable periodic greedy evaluation.
    #[arg(long)]
    eval: bool,
    /// Record wall-clock time per step (makes CSVs nondeterministic).
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, value_parser = ENV_NAMES)]
    env: String,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 1_000_000)]
    max_iters: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, value_parser = ENV_NAMES)]
    env: String,
    /// Penalty table source: `zero`, `qstar`, or a path to a Q CSV.
    #[arg(long, default_value = "zero")]
    phi: String,
    /// Expectation mode: `exact` or `batch:<K>`.
    #[arg(long, default_value = "exact")]
    mode: String,
    #[arg(long, default_value_t = 1000)]
    paths: usize,
    /// Restrict to one state (with --action); default prints every pair.
    #[arg(long)]
    state: Option<usize>,
    #[arg(long)]
    action: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    cap: usize,
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_parser = ENV_NAMES)]
    env: String,
    /// Comma-separated agent names.
    #[arg(long, value_delimiter = ',', default_value = "lbql,ql")]
    agents: Vec<String>,
    /// Exploration exponents e.
    #[arg(long, value_delimiter = ',', default_value = "0.4,0.5,0.6")]
    e_grid: Vec<f64>,
    /// Learning-rate exponents r.
    #[arg(long, value_delimiter = ',', default_value = "0.5,0.6,0.7,0.8,0.9")]
    r_grid: Vec<f64>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long, default_value = "out/sweep.csv")]
    out: PathBuf,
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// Run CSVs, one per seed.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Bounds(args) => cmd_bounds(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Report(args) => cmd_report(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        let code = match e {
            HarnessError::Config(_) => 2,
            HarnessError::UnsupportedMetric(_) => 3,
            _ => 1,
        };
        std::process::exit(code);
    }
}

fn build_config(
    env: Option<String>,
    agent: Option<String>,
    steps: Option<u64>,
    seeds: Option<Vec<u64>>,
    gamma: Option<f64>,
    file: Option<&Path>,
) -> Result<RunConfig, HarnessError> {
    let mut config = match file {
        Some(path) => RunConfig::from_file(path)?,
        None => {
            let env = env.clone().ok_or_else(|| {
                HarnessError::Config("--env is required without a config file".into())
            })?;
            RunConfig::new(&env)
        }
    };
    if let Some(env) = env {
        config.env = env;
    }
    if let Some(agent) = agent {
        config.agent = agent;
    }
    if let Some(steps) = steps {
        config.steps = steps;
    }
    if let Some(seeds) = seeds {
        config.seeds = seeds;
    }
    if let Some(gamma) = gamma {
        config.gamma = Some(gamma);
    }
    Ok(config)
}

fn cmd_run(args: RunArgs) -> Result<(), HarnessError> {
    let mut config = build_config(
        args.env,
        args.agent,
        args.steps,
        args.seeds,
        args.gamma,
        args.config.as_deref(),
    )?;
    if args.eval {
        config.eval.enabled = true;
    }
    if args.timing {
        config.record_wall_time = true;
    }
    let q_star = match &args.qstar {
        Some(path) => {
            let model = envs::by_name_with(&config.env, config.gamma)?;
            Some(load_q_csv(path, model.as_ref())?)
        }
        None => None,
    };
    let outcome = harness::run_with_reference(&config, q_star)?;
    let paths = write_run_csvs(&outcome, &args.out)?;
    let agg = write_aggregate_csv(&outcome, &args.out)?;
    let perf = write_perf_csv(&outcome, &args.out)?;
    for p in &paths {
        println!("wrote {}", p.display());
    }
    println!("wrote {}", agg.display());
    if let Some(p) = perf {
        println!("wrote {}", p.display());
    }
    let violations: u64 = outcome.logs.iter().map(|l| l.bound_violations).sum();
    let truncated: u64 = outcome.logs.iter().map(|l| l.truncated_paths).sum();
    println!(
        "{} seeds x {} steps; bound violations: {violations}; truncated paths: {truncated}",
        outcome.logs.len(),
        config.steps
    );
    if let Ok(entries) = time_to_thresholds(&outcome.logs, &DEFAULT_THRESHOLDS) {
        for e in entries {
            let n = e.steps.map(|v| v.to_string()).unwrap_or_else(|| "-".into());
            println!(
                "relative error {:>4.0}%: mean first crossing at step {n}",
                e.threshold * 100.0
            );
        }
    }
    Ok(())
}

fn cmd_solve(args: SolveArgs) -> Result<(), HarnessError> {
    let model = envs::by_name_with(&args.env, args.gamma)?;
    let q = dp::q_value_iteration(model.as_ref(), args.tol, args.max_iters)?;
    let v = dp::greedy_value(&q, model.as_ref());
    std::fs::create_dir_all(&args.out)?;
    let q_path = args
        .out
        .join(format!("qstar-{}-tol{:e}.csv", args.env, args.tol));
    std::fs::write(&q_path, q_table_csv(&q))?;
    let v_path = args
        .out
        .join(format!("vstar-{}-tol{:e}.csv", args.env, args.tol));
    let mut text = String::from("state,v\n");
    for (s, value) in v.0.iter().enumerate() {
        text.push_str(&format!("{s},{value}\n"));
    }
    std::fs::write(&v_path, text)?;
    println!("wrote {}", q_path.display());
    println!("wrote {}", v_path.display());
    Ok(())
}

fn cmd_bounds(args: BoundsArgs) -> Result<(), HarnessError> {
    let model = envs::by_name_with(&args.env, args.gamma)?;
    let model_ref = model.as_ref();
    let phi = match args.phi.as_str() {
        "zero" => QTable::for_model(model_ref, 0.0),
        "qstar" => dp::q_value_iteration(model_ref, dp::DEFAULT_TOL, dp::DEFAULT_MAX_ITERS)?,
        path => load_q_csv(Path::new(path), model_ref)?,
    };
    let mode = parse_mode(&args.mode, model_ref)?;
    let ctx = PenaltyContext::new(model_ref, &phi, mode);
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let pairs: Vec<(StateId, ActionId)> = match (args.state, args.action) {
        (Some(s), Some(a)) => vec![(StateId(s), ActionId(a))],
        (None, None) => (0..model_ref.state_count())
            .flat_map(|s| (0..model_ref.action_count()).map(move |a| (StateId(s), ActionId(a))))
            .filter(|&(s, a)| model_ref.is_feasible(s, a))
            .collect(),
        _ => {
            return Err(HarnessError::Config(
                "--state and --action must be given together".into(),
            ))
        }
    };
    println!("state,action,upper_mean,upper_stderr,lower_mean,lower_stderr");
    for (s, a) in pairs {
        if s.0 >= model_ref.state_count() || a.0 >= model_ref.action_count() {
            return Err(HarnessError::Config(format!(
                "pair ({}, {}) out of range",
                s.0, a.0
            )));
        }
        let est = mc_bound_estimate(model_ref, &ctx, s, a, args.paths, args.cap, &mut rng)
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        println!(
            "{},{},{},{},{},{}",
            s.0, a.0, est.upper_mean, est.upper_stderr, est.lower_mean, est.lower_stderr
        );
    }
    Ok(())
}

fn parse_mode<'a>(text: &str, model: &dyn Mdp) -> Result<ExpectationMode<'a>, HarnessError> {
    if text == "exact" {
        if model.noise_support().is_none() {
            return Err(HarnessError::UnsupportedMetric(format!(
                "exact expectations unavailable for '{}'; use batch:<K>",
                model.name()
            )));
        }
        return Ok(ExpectationMode::Exact);
    }
    if let Some(k) = text.strip_prefix("batch:") {
        let k: usize = k
            .parse()
            .map_err(|_| HarnessError::Config(format!("bad batch size in mode '{text}'")))?;
        if k == 0 {
            return Err(HarnessError::Config("batch size must be >= 1".into()));
        }
        return Ok(ExpectationMode::FreshBatches { k });
    }
    Err(HarnessError::Config(format!(
        "unknown mode '{text}' (use exact or batch:<K>)"
    )))
}

fn cmd_sweep(args: SweepArgs) -> Result<(), HarnessError> {
    let mut base = build_config(
        Some(args.env),
        None,
        args.steps,
        args.seeds,
        None,
        args.config.as_deref(),
    )?;
    if args.timing {
        base.record_wall_time = true;
    }
    let thresholds = args
        .thresholds
        .unwrap_or_else(|| DEFAULT_THRESHOLDS.to_vec());
    let agent_names: Vec<&str> = args.agents.iter().map(String::as_str).collect();
    let rows = harness::sweep(&base, &agent_names, &args.e_grid, &args.r_grid, &thresholds)?;
    write_sweep_csv(&rows, &thresholds, &args.out)?;
    print!("{}", sweep_csv_text(&rows, &thresholds));
    println!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<(), HarnessError> {
    let thresholds = args
        .thresholds
        .unwrap_or_else(|| DEFAULT_THRESHOLDS.to_vec());
    let mut logs = Vec::new();
    for path in &args.inputs {
        logs.push(parse_run_csv(path)?);
    }
    let entries = time_to_thresholds(&logs, &thresholds)?;
    println!("threshold,n,t(s)");
    for e in entries {
        let n = e.steps.map(|v| v.to_string()).unwrap_or_else(|| "-".into());
        let t = e
            .seconds
            .map(|v| v.to_string())
            .unwrap_or_else(|| "-".into());
        println!("{}%,{n},{t}", e.threshold * 100.0);
    }
    Ok(())
}

/// Reads one per-seed run CSV back into a log (the inverse of the writer,
/// for the columns the report needs).
fn parse_run_csv(path: &Path) -> Result<SeedLog, HarnessError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| HarnessError::Config(format!("{} is empty", path.display())))?;
    if header != harness::RUN_HEADER {
        return Err(HarnessError::Config(format!(
            "unexpected header in {}: {header}",
            path.display()
        )));
    }
    let mut seed = 0u64;
    let mut rewards = Vec::new();
    let mut rels: Vec<f64> = Vec::new();
    let mut have_rel = true;
    let mut walls: Vec<f64> = Vec::new();
    let mut have_wall = true;
    let mut updated = Vec::new();
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(HarnessError::Config(format!(
                "bad row in {}: {line}",
                path.display()
            )));
        }
        let bad = |what: &str| HarnessError::Config(format!("bad {what} in {}", path.display()));
        seed = fields[0].parse().map_err(|_| bad("run_id"))?;
        rewards.push(fields[2].parse().map_err(|_| bad("reward"))?);
        if fields[3].is_empty() {
            have_rel = false;
        } else {
            rels.push(fields[3].parse().map_err(|_| bad("rel_error"))?);
        }
        updated.push(fields[5] == "1");
        if fields[6].is_empty() {
            have_wall = false;
        } else {
            walls.push(fields[6].parse().map_err(|_| bad("wall_ms"))?);
        }
    }
    Ok(SeedLog {
        seed,
        rewards,
        rel_errors: have_rel.then_some(rels),
        bound_gaps: None,
        bounds_updated: updated,
        wall_ms: have_wall.then_some(walls),
        evals: Vec::new(),
        bound_violations: 0,
        truncated_paths: 0,
    })
}
