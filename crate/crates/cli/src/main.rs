//! `cqra`: fit, apply and evaluate forecast combinations from the command line.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "cqra",
    version,
    about = "Combine probabilistic forecasts by pinball-loss regression"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit combination weights on the leading part of a panel.
    Fit(FitArgs),
    /// Apply fitted weights to a forecast panel.
    Predict(PredictArgs),
    /// Score fitted weights against BI on the trailing part of a panel.
    Evaluate(EvaluateArgs),
    /// Run the whole pipeline on a synthetic scenario.
    Demo(DemoArgs),
    /// Compare the LP solver with a brute-force search on random two-model instances.
    OracleCheck(OracleArgs),
}

#[derive(Args, Debug)]
struct Rearrange {
    /// Sort each step's quantiles ascending before scoring or writing (default).
    #[arg(long = "rearrange", overrides_with = "no_rearrange")]
    rearrange: bool,
    /// Keep combined quantiles as fitted, crossings included.
    #[arg(long = "no-rearrange", overrides_with = "rearrange")]
    no_rearrange: bool,
}

impl Rearrange {
    fn enabled(&self) -> bool {
        !self.no_rearrange
    }
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Long-format forecast CSV (`model,timestamp,level,value`).
    #[arg(long)]
    forecasts: PathBuf,
    /// Actuals CSV (`timestamp,value`).
    #[arg(long)]
    actuals: PathBuf,
    /// Comma-separated method tags, e.g. `CQRA-T,QRA-T,SA`.
    #[arg(long, default_value = "CQRA-T")]
    methods: String,
    /// Leading fraction of the common time span used for fitting.
    #[arg(long, default_value_t = 0.5)]
    fit_fraction: f64,
    /// Add a free intercept to unconstrained regressions.
    #[arg(long)]
    intercept: bool,
    /// Pick the best individual per level instead of overall.
    #[arg(long)]
    bi_per_level: bool,
    /// Run per-level fits on the calling thread.
    #[arg(long)]
    sequential: bool,
    /// Output directory for the weight files.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    forecasts: PathBuf,
    /// Weight files written by `fit`.
    #[arg(long, required = true, num_args = 1..)]
    weights: Vec<PathBuf>,
    #[command(flatten)]
    rearrange: Rearrange,
    /// Output directory for one forecast CSV per weight file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    forecasts: PathBuf,
    #[arg(long)]
    actuals: PathBuf,
    /// Weight files written by `fit`.
    #[arg(long, required = true, num_args = 1..)]
    weights: Vec<PathBuf>,
    /// Leading fraction held out for fitting; the rest is scored.
    #[arg(long, default_value_t = 0.5)]
    fit_fraction: f64,
    /// Series name used in the report.
    #[arg(long, default_value = "load")]
    series: String,
    #[command(flatten)]
    rearrange: Rearrange,
    /// Output directory for `report.csv` and `report.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DemoArgs {
    /// Scenario seed; overrides any seed in the scenario file.
    #[arg(long)]
    seed: Option<u64>,
    /// Scenario config (`key = value` lines).
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[command(flatten)]
    rearrange: Rearrange,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct OracleArgs {
    /// Number of random instances.
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    /// Seed of the first instance; instance i uses seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for the replay file written on failure.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, hide = true)]
    inject_fault: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Predict(a) => commands::predict(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Demo(a) => commands::demo(a),
        Command::OracleCheck(a) => commands::oracle_check(a),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(commands::exit_code(&err))
        }
    }
}
