use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{Context, Result};
use cqra::io::{self, format_sig, ReportTable};
use cqra::loss::pinball_score;
use cqra::lp::SolverOptions;
use cqra::par::Execution;
use cqra::rearrange::crossing_count;
use cqra::synth::{default_subsets, make_pool, SyntheticScenario};
use cqra::verify::{run_oracle_check, OracleOptions};
use cqra::{
    align, fit as fit_method, predict as apply, AlignedDataset, CombinationModel, Error, FitOptions, MethodTag,
    QuantileGrid,
};
use log::info;

use crate::output::{forecast_name, weights_name, Staged};
use crate::{DemoArgs, EvaluateArgs, FitArgs, OracleArgs, PredictArgs};

/// 1 for verification or solver failures, 2 for usage and input problems.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Solver { .. } | Error::Lp(_) | Error::Internal(_)) => 1,
        _ => 2,
    }
}

fn load(forecasts: &Path, actuals: &Path) -> Result<AlignedDataset> {
    let panel = io::read_forecasts(forecasts)?;
    let actuals = io::read_actuals(actuals)?;
    Ok(align(panel, actuals)?)
}

fn diagnostics_table(models: &[CombinationModel]) -> String {
    let mut out = format!(
        "{:<12} {:>6} {:>14} {:>10}\n",
        "method", "level", "in_sample", "iterations"
    );
    for model in models {
        let d = model.diagnostics();
        for (qi, level) in model.grid().levels().iter().enumerate() {
            let _ = writeln!(
                out,
                "{:<12} {:>6} {:>14} {:>10}",
                model.method().as_str(),
                format_sig(*level, 6),
                format_sig(d.in_sample[qi], 10),
                d.iterations[qi]
            );
        }
    }
    out
}

pub fn fit(args: FitArgs) -> Result<ExitCode> {
    let methods = MethodTag::parse_list(&args.methods)?;
    let data = load(&args.forecasts, &args.actuals)?;
    let (fit_part, _) = data.split_by_ratio(args.fit_fraction)?;
    let options = FitOptions {
        intercept: args.intercept,
        bi_per_level: args.bi_per_level,
        solver: SolverOptions::default(),
        execution: if args.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        },
    };
    let models = methods
        .iter()
        .map(|&m| fit_method(m, &fit_part, &options))
        .collect::<cqra::Result<Vec<_>>>()?;
    let mut staged = Staged::default();
    for model in &models {
        staged.add(weights_name(model.method()), io::weights_json(model));
    }
    staged.commit(&args.out)?;
    print!("{}", diagnostics_table(&models));
    info!("fitted {} methods on {} steps", models.len(), fit_part.len());
    Ok(ExitCode::SUCCESS)
}

pub fn predict(args: PredictArgs) -> Result<ExitCode> {
    let panel = io::read_forecasts(&args.forecasts)?;
    let mut staged = Staged::default();
    for path in &args.weights {
        let model = io::read_weights(path)?;
        let combined =
            apply(&model, &panel, args.rearrange.enabled()).with_context(|| format!("applying {}", path.display()))?;
        staged.add(forecast_name(model.method()), io::combined_csv(&combined));
    }
    for path in staged.commit(&args.out)? {
        println!("{}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

pub fn evaluate(args: EvaluateArgs) -> Result<ExitCode> {
    let data = load(&args.forecasts, &args.actuals)?;
    let (fit_part, test) = data.split_by_ratio(args.fit_fraction)?;
    let mut models = args
        .weights
        .iter()
        .map(|p| io::read_weights(p).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    if !models.iter().any(|m| m.method() == MethodTag::Bi) {
        models.push(fit_method(MethodTag::Bi, &fit_part, &FitOptions::default())?);
    }
    let mut table = ReportTable::new();
    for model in &models {
        let combined = apply(model, test.panel(), args.rearrange.enabled())?;
        table.insert(model.method(), &args.series, pinball_score(&combined, test.actuals())?)?;
    }
    let mut staged = Staged::default();
    staged.add("report.csv", table.to_csv());
    staged.add("report.json", table.to_json());
    staged.commit(&args.out)?;
    print!("{}", String::from_utf8_lossy(&table.to_csv()));
    Ok(ExitCode::SUCCESS)
}

pub fn demo(args: DemoArgs) -> Result<ExitCode> {
    let mut scenario = match &args.scenario {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            SyntheticScenario::from_config(&text)?
        }
        None => SyntheticScenario::default(),
    };
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    let grid = QuantileGrid::deciles();
    let solver = SolverOptions::default();
    let experiment = make_pool(&scenario, &default_subsets(), &grid, &solver, Execution::Parallel)?;
    let (fit_part, test) = experiment.split()?;
    let options = FitOptions::default();
    let series = "synthetic";

    let mut staged = Staged::default();
    let mut table = ReportTable::new();
    let mut crossings = String::from("method,crossing_steps,steps\n");
    for method in MethodTag::REPORT {
        let model = fit_method(method, &fit_part, &options)?;
        let raw = apply(&model, test.panel(), false)?;
        let scored = if args.rearrange.enabled() {
            cqra::rearrange::rearrange(&raw)?
        } else {
            raw.clone()
        };
        table.insert(method, series, pinball_score(&scored, test.actuals())?)?;
        let _ = writeln!(crossings, "{method},{},{}", crossing_count(&raw), raw.n_times());
        staged.add(weights_name(method), io::weights_json(&model));
    }
    staged.add("report.csv", table.to_csv());
    staged.add("report.json", table.to_json());
    staged.add("crossings.csv", crossings);
    staged.add("forecasts.csv", io::forecasts_csv(experiment.pool.panel()));
    staged.add("actuals.csv", io::actuals_csv(experiment.pool.actuals()));
    staged.add("scenario.conf", scenario.to_string());
    staged.commit(&args.out)?;

    print!("{}", String::from_utf8_lossy(&table.to_csv()));
    println!(
        "fit fraction {} ({} of {} steps); outputs in {}",
        format_sig(experiment.fit_fraction(), 17),
        experiment.fit_len,
        experiment.pool.len(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

pub fn oracle_check(args: OracleArgs) -> Result<ExitCode> {
    let options = OracleOptions {
        trials: args.trials as usize,
        seed: args.seed,
        corrupt: args.inject_fault,
        ..OracleOptions::default()
    };
    let trials = run_oracle_check(&options)?;
    let worst = trials.iter().map(|t| t.relative_gap).fold(0.0, f64::max);
    let failures: Vec<_> = trials.iter().filter(|t| !t.passed).collect();
    println!(
        "{} trials, {} breaches, worst relative gap {} (tolerance {})",
        trials.len(),
        failures.len(),
        format_sig(worst, 3),
        format_sig(options.tolerance, 3)
    );
    let Some(first) = failures.first() else {
        return Ok(ExitCode::SUCCESS);
    };
    let mut staged = Staged::default();
    let name = format!("oracle-replay-{}.json", first.seed);
    staged.add(name.as_str(), serde_json::to_string_pretty(&failures)? + "\n");
    staged.commit(&args.out)?;
    eprintln!(
        "breach on seed {}: LP {} vs oracle {}; replay written to {}",
        first.seed,
        first.lp_objective,
        first.search.refined_min,
        args.out.join(name).display()
    );
    Ok(ExitCode::from(1))
}
