//! `cfpilot`: runs pilot-assignment experiments and writes CSV/JSON results.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cellfree_pilot::channel::estimation_stats;
use cellfree_pilot::harness::output::write_matrix_csv;
use cellfree_pilot::harness::validate::run_validation;
use cellfree_pilot::harness::{draw_channels, emit, preset_with, run_experiment, run_scheme, Config, HarnessError};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "cfpilot",
    version,
    about = "Pilot assignment experiments for cell-free massive MIMO"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by --config.
    Run(Common),
    /// Small-scale CDF with exhaustive search (M=50, K=12, tau_p=3).
    Fig1(Common),
    /// Per-user throughput CDF, M=200, K=40, tau_p=10, L in {1, 3}.
    Fig2(Common),
    /// Average throughput versus number of APs, L in {1, 3}.
    Fig3(Common),
    /// Average throughput versus number of UEs.
    Fig4(Common),
    /// Average throughput versus number of pilots.
    Fig5(Common),
    /// Throughput versus location-estimation error.
    Fig6(Common),
    /// Location, LSF or both as clustering features.
    Fig7(Common),
    /// Percentile table, M=200, K=40, tau_p=10, L in {1, 3}.
    Table2(Common),
    /// Run the built-in invariant and oracle checks.
    Validate {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Args, Clone)]
struct Common {
    /// JSON config file with radio/topology/solver/experiment sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    drops: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Iteration budgets instead of wall-clock budgets.
    #[arg(long)]
    deterministic: bool,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Override a config field, e.g. `--set radio.num_pilots=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Write beta and per-scheme gamma (rows = APs, columns = UEs) of drop 0
    /// into this directory.
    #[arg(long, value_name = "DIR")]
    dump_channels: Option<PathBuf>,
}

fn configs(name: Option<&str>, args: &Common) -> Result<Vec<Config>, HarnessError> {
    let base = match &args.config {
        Some(path) => Config::from_path(path)?,
        None if name.is_none() => {
            return Err(HarnessError::Config("`run` needs --config".into()));
        }
        None => Config::default(),
    };
    let mut cfgs = match name {
        Some(n) => preset_with(n, &base)?,
        None => vec![base],
    };
    for cfg in &mut cfgs {
        for o in &args.overrides {
            cfg.set(o)?;
        }
        let e = &mut cfg.experiment;
        if let Some(d) = args.drops {
            e.drops = d;
        }
        if let Some(s) = args.seed {
            e.seed = s;
        }
        if args.deterministic {
            e.deterministic = true;
        }
        if args.jobs.is_some() {
            e.jobs = args.jobs;
        }
        cfg.validate()?;
    }
    Ok(cfgs)
}

fn dump_channels(cfg: &Config, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let cfg = match &cfg.experiment.sweep {
        Some(s) => cfg.at(s.param, &s.values[0])?,
        None => cfg.clone(),
    };
    let ch = draw_channels(&cfg, 0)?;
    let mut written = vec![dir.join(format!("{}_beta.csv", cfg.experiment.name))];
    write_matrix_csv(&ch.large_scale.beta, &written[0])?;
    for &scheme in &cfg.experiment.schemes {
        let out = run_scheme(&cfg, &ch, scheme, 0)?;
        let stats = estimation_stats(&ch.large_scale, &out.solver.assignment, &cfg.radio)?;
        let path = dir.join(format!("{}_gamma_{scheme}.csv", cfg.experiment.name));
        write_matrix_csv(&stats.gamma, &path)?;
        written.push(path);
    }
    Ok(written)
}

enum Failure {
    Error(HarnessError),
    Partial(serde_json::Value),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        Failure::Error(e)
    }
}

fn experiment(name: Option<&str>, args: &Common) -> Result<serde_json::Value, Failure> {
    let mut runs = Vec::new();
    let mut failed = Vec::new();
    for cfg in configs(name, args)? {
        let mut dumped = Vec::new();
        if let Some(dir) = &args.dump_channels {
            dumped = dump_channels(&cfg, dir)?;
        }
        let result = run_experiment(&cfg)?;
        let files = emit(&result, &args.out)?;
        if !result.failures.is_empty() {
            failed.push(json!({"name": result.name, "failures": result.failures}));
        }
        runs.push(json!({
            "name": result.name,
            "samples": result.ues.len(),
            "outputs": files,
            "channel_dumps": dumped,
        }));
    }
    if failed.is_empty() {
        Ok(json!({"status": "ok", "runs": runs}))
    } else {
        Err(Failure::Partial(json!({
            "error": "partial-failure",
            "message": "some drops failed; their samples are missing from the outputs",
            "runs": runs,
            "failed": failed,
        })))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::Validate { seed } => {
            let report = run_validation(*seed);
            println!("{}", serde_json::to_string_pretty(&report).expect("report serialises"));
            return if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            };
        }
        Command::Run(a) => (None, a),
        Command::Fig1(a) => (Some("fig1"), a),
        Command::Fig2(a) => (Some("fig2"), a),
        Command::Fig3(a) => (Some("fig3"), a),
        Command::Fig4(a) => (Some("fig4"), a),
        Command::Fig5(a) => (Some("fig5"), a),
        Command::Fig6(a) => (Some("fig6"), a),
        Command::Fig7(a) => (Some("fig7"), a),
        Command::Table2(a) => (Some("table2"), a),
    };
    match experiment(name, args) {
        Ok(summary) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&summary).expect("summary serialises")
            );
            ExitCode::SUCCESS
        }
        Err(Failure::Error(e)) => {
            eprintln!("{}", serde_json::to_string(&e.report()).expect("report serialises"));
            ExitCode::from(1)
        }
        Err(Failure::Partial(v)) => {
            eprintln!("{}", serde_json::to_string(&v).expect("report serialises"));
            ExitCode::from(2)
        }
    }
}
