//! Subcommand definitions and their implementations.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use cojump::harness::{sig6, write_outputs};
use cojump::{
    run_experiment, scenario, simulate_week, validate_rate_conditions, AssumptionIndices, ExperimentPlan, Method,
    SamplingGrid, TestKind, TuningParams, ValidationReport,
};

use crate::config::{RunConfig, OUT_DIR_ENV};
use crate::error::{CliError, CliResult};
use crate::ingest::ingest_csv;
use crate::pipeline::{run_pipeline, write_pipeline_outputs};
use crate::weeks::to_weekly_paths;

#[derive(Debug, Parser)]
#[command(name = "cojump", version, about = "Tests for common price and volatility jumps")]
pub struct Cli {
    /// Output directory; overrides the config file and $COJUMP_OUT_DIR.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one week from a scenario and dump the path.
    Simulate(SimulateArgs),
    /// Run a Monte Carlo experiment plan.
    Mc(McArgs),
    /// Test a price file week by week.
    Test(TestArgs),
    /// Check tuning rates against the assumption indices.
    ValidateRates(RatesArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scenario: String,
    #[arg(long, default_value_t = 1000)]
    pub per_day: usize,
    #[arg(long, default_value_t = 5)]
    pub days: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct McArgs {
    /// Plan file (TOML); built-in defaults when absent.
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// The large design: all scenarios, 1000 replications, up to 24000 observations per day.
    #[arg(long)]
    pub full_scale: bool,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub scenarios: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub per_day: Option<Vec<usize>>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    /// CSV with header `timestamp,price`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Jump-size filters as log-return fractions, e.g. `0,0.002`.
    #[arg(long, value_delimiter = ',')]
    pub sweep: Option<Vec<f64>>,
    /// Test methods, e.g. `pivotal_chisq,ratio_truncated`.
    #[arg(long, value_delimiter = ',')]
    pub tests: Option<Vec<String>>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Disjoint,
    DisjointGeneral,
    Common,
    CommonGeneral,
}

#[derive(Debug, Args)]
pub struct RatesArgs {
    #[arg(long, default_value_t = 0.0)]
    pub r: f64,
    #[arg(long, default_value_t = 0.5)]
    pub v: f64,
    #[arg(long, default_value_t = 0.49)]
    pub varpi: f64,
    #[arg(long, default_value_t = 0.49)]
    pub rho: f64,
    #[arg(long, value_enum, default_value_t = KindArg::Disjoint)]
    pub kind: KindArg,
    /// Smoothness index of `f` for the general common-jump theorem.
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
}

fn resolve_dir(flag: Option<PathBuf>, fallback: &Path) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from)).unwrap_or_else(|| fallback.to_owned())
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::data(format!("{}: {e}", path.display()))
}

/// Runs a parsed command line; returns the files written.
pub fn run(cli: Cli) -> CliResult<Vec<PathBuf>> {
    match cli.command {
        Command::Simulate(args) => simulate(args, cli.out_dir),
        Command::Mc(args) => monte_carlo(args, cli.out_dir),
        Command::Test(args) => test(args, cli.out_dir),
        Command::ValidateRates(args) => {
            let report = validate_rates(&args)?;
            let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::data(e.to_string()))?;
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            Ok(Vec::new())
        }
    }
}

pub fn simulate(args: SimulateArgs, out_dir: Option<PathBuf>) -> CliResult<Vec<PathBuf>> {
    let sc = scenario(&args.scenario)?;
    let grid = SamplingGrid::days(args.days, args.per_day).map_err(|e| CliError::config(e.to_string()))?;
    let week = simulate_week(&sc.params, &grid, args.seed)?;
    let dir = resolve_dir(out_dir, Path::new("out"));
    std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;

    let path_file = dir.join(format!("path_{}_{}.csv", sc.name, args.seed));
    let mut w = csv::Writer::from_path(&path_file).map_err(|e| io_err(&path_file, e))?;
    w.write_record(["index", "time", "log_price"]).map_err(|e| io_err(&path_file, e))?;
    for (i, v) in week.path.values().iter().enumerate() {
        w.write_record([i.to_string(), sig6(i as f64 * grid.mesh()), sig6(*v)])
            .map_err(|e| io_err(&path_file, e))?;
    }
    w.flush().map_err(|e| io_err(&path_file, e))?;

    let truth_file = dir.join(format!("truth_{}_{}.json", sc.name, args.seed));
    let mut truth = serde_json::json!({
        "scenario": sc.name,
        "seed": args.seed,
        "ground_truth": week.ground_truth,
        "price_jumps": week.true_price_jumps,
        "vol_jumps": week.true_vol_jumps,
        "integrated_variance": week.integrated_variance,
    });
    crate::pipeline::round_json(&mut truth);
    std::fs::write(&truth_file, truth.to_string() + "\n").map_err(|e| io_err(&truth_file, e))?;
    Ok(vec![path_file, truth_file])
}

pub fn monte_carlo(args: McArgs, out_dir: Option<PathBuf>) -> CliResult<Vec<PathBuf>> {
    let mut plan = match (&args.plan, args.full_scale) {
        (Some(p), _) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?;
            toml::from_str::<ExperimentPlan>(&text).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?
        }
        (None, true) => ExperimentPlan::full_scale(),
        (None, false) => ExperimentPlan::default(),
    };
    if let Some(r) = args.reps {
        plan.n_reps = r;
    }
    if let Some(s) = args.scenarios {
        plan.scenarios = s;
    }
    if let Some(n) = args.per_day {
        plan.n_per_day = n;
    }
    if let Some(s) = args.seed {
        plan.master_seed = s;
    }
    plan.validate().map_err(|e| CliError::config(e.to_string()))?;
    let result = run_experiment(&plan)?;
    let dir = resolve_dir(out_dir, Path::new("out"));
    Ok(write_outputs(&dir, &result)?)
}

pub fn test(args: TestArgs, out_dir: Option<PathBuf>) -> CliResult<Vec<PathBuf>> {
    let mut config = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = args.sweep {
        config.sweep = s;
    }
    if let Some(t) = args.tests {
        config.tests = t.iter().map(|s| s.parse::<Method>()).collect::<Result<_, _>>()?;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    config.resolve_out_dir(out_dir);
    config.validate()?;

    let ticks = ingest_csv(&args.input)?;
    let weeks = to_weekly_paths(&ticks, &config.grouping, &config.tuning)?;
    if weeks.weeks.is_empty() {
        return Err(CliError::data(format!("{}: no week long enough to test", args.input.display())));
    }
    let out = run_pipeline(&config, &weeks.weeks)?;
    write_pipeline_outputs(&config.out_dir, &out)
}

pub fn validate_rates(args: &RatesArgs) -> CliResult<ValidationReport> {
    let assume = AssumptionIndices::new(args.r, args.v).map_err(|e| CliError::config(e.to_string()))?;
    let tuning = TuningParams { varpi: args.varpi, rho: args.rho, ..Default::default() };
    tuning.validate().map_err(|e| CliError::config(e.to_string()))?;
    let kind = match args.kind {
        KindArg::Disjoint => TestKind::DisjointClt,
        KindArg::DisjointGeneral => TestKind::DisjointCltGeneralF,
        KindArg::Common => TestKind::CommonClt,
        KindArg::CommonGeneral => TestKind::CommonCltGeneralF { p: args.p },
    };
    Ok(validate_rate_conditions(&assume, &tuning, kind))
}
