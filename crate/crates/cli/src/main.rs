//! `threshlasso` command line: simulations, fits on CSV data, the panel
//! growth regression and the equicorrelation bound check.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use threshlasso::equicorr::{theory_grid, TheoryRow, DEFAULT_M, DEFAULT_RHO, DEFAULT_TAU};
use threshlasso::estimator::PathPoint;
use threshlasso::growth::{build_panel, format_report_text, report_for_panel, write_report_csv, PanelSpec, SampleFilter};
use threshlasso::linalg::quantile_sorted;
use threshlasso::montecarlo::{
    format_text_table, run_experiment, table_suite, write_summary_csv, ExperimentOptions, ExperimentSummary,
};
use threshlasso::{
    estimate, Dataset, Error, Execution, FitOptions, GridSpec, InterceptMode, LambdaChoice, ThresholdRule,
};

use crate::config::{ConfigFile, EstimationSection};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_)
            | Error::InvalidGrid(_)
            | Error::UnknownTable(_)
            | Error::SingularSigmaTau(_)
            | Error::EmptyTauGrid
            | Error::Panel(_)
            | Error::Csv(_)
            | Error::Io(_)
            | Error::InvalidDataset(_)
            | Error::EmptyInput => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

#[derive(Parser)]
#[command(name = "threshlasso", version, about = "Thresholded scaled Lasso for threshold regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo experiments over a named table or custom designs.
    Simulate(SimulateArgs),
    /// Fit one dataset read from CSV.
    Fit(FitArgs),
    /// Pooled panel growth regression with a debt threshold.
    Growth(GrowthArgs),
    /// Check the sup-norm bound on the equicorrelation grid.
    TheoryCheck(TheoryArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// TOML run manifest; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Clone)]
struct EstimationArgs {
    /// Fixed λ instead of the BIC path.
    #[arg(long, conflicts_with = "theoretical_lambda")]
    lambda: Option<f64>,
    /// Fixed threshold constant instead of the BIC choice.
    #[arg(long = "C")]
    c: Option<f64>,
    /// Tuning formula with constant A.
    #[arg(long = "theoretical-lambda", value_name = "A")]
    theoretical_lambda: Option<f64>,
    /// Threshold grid lo:hi:step (values for simulate, centiles otherwise).
    #[arg(long)]
    grid: Option<String>,
    /// Use every observed Q between the grid end points.
    #[arg(long)]
    exhaustive_tau: bool,
    /// Cutoff rule: table (H = Cλ) or theory (H = 2Cλ).
    #[arg(long, value_parser = parse_rule)]
    rule: Option<ThresholdRule>,
    /// Run all loops on the calling thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    est: EstimationArgs,
    /// table1 … table5
    #[arg(long)]
    table: Option<String>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    est: EstimationArgs,
    /// CSV with a header row: response, threshold variable, regressors.
    data: Option<PathBuf>,
    #[arg(long)]
    y_col: Option<String>,
    #[arg(long)]
    q_col: Option<String>,
    /// none, common or both
    #[arg(long, value_parser = parse_intercept)]
    intercept: Option<InterceptMode>,
}

#[derive(Args)]
struct GrowthArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    est: EstimationArgs,
    /// Country-year CSV.
    data: Option<PathBuf>,
    /// Country fixed effects.
    #[arg(long)]
    fe: bool,
    /// Years in the forward growth average.
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    controls: Option<Vec<String>>,
    #[arg(long)]
    debt_col: Option<String>,
    #[arg(long)]
    from: Option<i32>,
    #[arg(long)]
    to: Option<i32>,
    #[arg(long, value_delimiter = ',')]
    years: Option<Vec<i32>>,
}

#[derive(Args)]
struct TheoryArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    rho: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    tau: Option<Vec<f64>>,
}

fn parse_rule(s: &str) -> Result<ThresholdRule, String> {
    match s {
        "table" => Ok(ThresholdRule::Table),
        "theory" => Ok(ThresholdRule::Theory),
        _ => Err(format!("unknown rule `{s}` (table or theory)")),
    }
}

fn parse_intercept(s: &str) -> Result<InterceptMode, String> {
    match s {
        "none" => Ok(InterceptMode::None),
        "common" => Ok(InterceptMode::Common),
        "both" => Ok(InterceptMode::BothRegimes),
        _ => Err(format!("unknown intercept mode `{s}` (none, common or both)")),
    }
}

fn parse_range(s: &str) -> CliResult<(f64, f64, f64)> {
    let v: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("grid `{s}`: {e}")))?;
    match v[..] {
        [lo, hi, step] => Ok((lo, hi, step)),
        _ => Err(CliError::Usage(format!("grid `{s}`: expected lo:hi:step"))),
    }
}

/// Whether the grid end points are threshold values or centiles of Q.
#[derive(Clone, Copy)]
enum GridKind {
    Values,
    Centiles,
}

/// Estimation flags merged over the `[estimation]` section.
struct Estimation {
    lambda: Option<f64>,
    c: Option<f64>,
    theoretical: Option<f64>,
    range: (f64, f64, f64),
    exhaustive: bool,
    rule: ThresholdRule,
    exec: Execution,
}

impl Estimation {
    fn merge(args: &EstimationArgs, file: &EstimationSection) -> CliResult<Self> {
        // a flag for either λ choice drops both file values
        let (lambda, theoretical) = if args.lambda.is_some() || args.theoretical_lambda.is_some() {
            (args.lambda, args.theoretical_lambda)
        } else {
            (file.lambda, file.theoretical_lambda)
        };
        if lambda.is_some() && theoretical.is_some() {
            return Err(CliError::Usage("lambda and theoretical_lambda are exclusive".into()));
        }
        let range = match args.grid.as_ref().or(file.grid.as_ref()) {
            Some(s) => parse_range(s)?,
            None => (0.15, 0.85, 0.05),
        };
        let sequential = args.sequential || file.sequential.unwrap_or(false);
        for (name, v) in [("lambda", lambda), ("C", args.c.or(file.c)), ("theoretical-lambda", theoretical)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(CliError::Usage(format!("--{name} must be positive, got {v}")));
                }
            }
        }
        Ok(Estimation {
            lambda,
            c: args.c.or(file.c),
            theoretical,
            range,
            exhaustive: args.exhaustive_tau || file.exhaustive_tau.unwrap_or(false),
            rule: args.rule.or(file.rule).unwrap_or_default(),
            exec: if sequential { Execution::Sequential } else { Execution::Parallel },
        })
    }

    /// `q` is needed only for an exhaustive grid over centiles.
    fn grid(&self, kind: GridKind, q: Option<&[f64]>) -> GridSpec {
        let (lo, hi, step) = self.range;
        match (self.exhaustive, kind) {
            (false, GridKind::Values) => GridSpec::Values { lo, hi, step },
            (false, GridKind::Centiles) => GridSpec::Quantiles { lo, hi, step },
            (true, GridKind::Values) => GridSpec::Exhaustive { t0: lo, t1: hi },
            (true, GridKind::Centiles) => {
                let mut sorted = q.unwrap_or(&[]).to_vec();
                sorted.sort_by(f64::total_cmp);
                if sorted.is_empty() {
                    return GridSpec::Exhaustive { t0: lo, t1: hi };
                }
                GridSpec::Exhaustive {
                    t0: quantile_sorted(&sorted, lo),
                    t1: quantile_sorted(&sorted, hi),
                }
            }
        }
    }

    fn fit_options(&self, grid: GridSpec) -> FitOptions {
        let mut opts = FitOptions {
            grid,
            rule: self.rule,
            fixed_c: self.c,
            ..FitOptions::default()
        };
        opts.lambda = match (self.lambda, self.theoretical) {
            (Some(l), _) => LambdaChoice::Fixed(l),
            (None, Some(a)) => LambdaChoice::Theoretical(a),
            (None, None) => LambdaChoice::Bic,
        };
        opts.estimator.exec = self.exec;
        opts
    }
}

fn init_threads(args: &CommonArgs, file: &ConfigFile) -> CliResult<()> {
    let threads = args.threads.or(file.run.threads);
    if threads == Some(0) {
        return Err(CliError::Usage("--threads must be positive".into()));
    }
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn out_dir(args: &CommonArgs, file: &ConfigFile) -> CliResult<PathBuf> {
    let dir = args.out.clone().or(file.run.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    Ok(dir)
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    s.push('\n');
    write_file(path, s)
}

fn cmd_simulate(args: SimulateArgs) -> CliResult<()> {
    let file = config::load(args.common.config.as_deref())?;
    init_threads(&args.common, &file)?;
    let est = Estimation::merge(&args.est, &file.estimation)?;
    let reps = args.reps.or(file.run.reps).unwrap_or(200);
    let seed = args.seed.or(file.run.seed).unwrap_or(42);
    if reps == 0 || seed == 0 {
        return Err(CliError::Usage("--reps and --seed must be positive".into()));
    }
    let (name, configs) = match args.table.or(file.simulate.table.clone()) {
        Some(t) => {
            let configs = table_suite(&t)?;
            (t, configs)
        }
        None if !file.simulate.dgp.is_empty() => ("custom".to_string(), file.simulate.dgp.clone()),
        None => return Err(CliError::Usage("give --table or [[simulate.dgp]] entries in --config".into())),
    };
    let opts = ExperimentOptions {
        fit: est.fit_options(est.grid(GridKind::Values, None)),
        exec: est.exec,
    };
    let out = out_dir(&args.common, &file)?;

    let mut summaries: Vec<ExperimentSummary> = Vec::with_capacity(configs.len());
    for (i, config) in configs.iter().enumerate() {
        log::info!("{name} {}/{}: {}", i + 1, configs.len(), config.label);
        let base = seed + (i as u64) * 1_000_000;
        summaries.push(run_experiment(config, reps, base, &opts)?.summary);
    }
    let mut csv = Vec::new();
    write_summary_csv(&name, &summaries, &mut csv)?;
    write_file(&out.join(format!("{name}_summary.csv")), csv)?;
    let text = format_text_table(&summaries);
    write_file(&out.join(format!("{name}_summary.txt")), &text)?;
    write_json(&out.join(format!("{name}_summary.json")), &summaries)?;
    print!("{text}");
    Ok(())
}

#[derive(Serialize)]
struct ProfileRow {
    tau: f64,
    criterion: f64,
    converged: bool,
}

#[derive(Serialize)]
struct FitReport {
    n: usize,
    m: usize,
    labels: Vec<String>,
    tau_hat: f64,
    lambda_hat: f64,
    c_hat: Option<f64>,
    cutoff: f64,
    alpha_hat: Vec<f64>,
    alpha_tilde: Vec<f64>,
    support_alpha: Vec<usize>,
    support_delta: Vec<usize>,
    break_detected: bool,
    converged: bool,
    profile: Vec<ProfileRow>,
    lambda_path: Vec<PathPoint>,
}

fn read_xyq(path: &Path, y_col: &str, q_col: &str) -> CliResult<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let headers = rdr.headers().map_err(|e| CliError::Usage(e.to_string()))?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Usage(format!("{}: no column `{name}`", path.display())))
    };
    let (yi, qi) = (find(y_col)?, find(q_col)?);
    let xi: Vec<usize> = (0..headers.len()).filter(|&i| i != yi && i != qi).collect();
    let (mut y, mut q) = (Vec::new(), Vec::new());
    let mut x = vec![Vec::new(); xi.len()];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Usage(e.to_string()))?;
        let num = |i: usize| {
            rec.get(i).unwrap_or("").parse::<f64>().map_err(|_| {
                CliError::Usage(format!("{}: row {}, column `{}` is not a number", path.display(), line + 2, &headers[i]))
            })
        };
        y.push(num(yi)?);
        q.push(num(qi)?);
        for (col, &i) in x.iter_mut().zip(&xi) {
            col.push(num(i)?);
        }
    }
    let labels = xi.iter().map(|&i| headers[i].to_string()).collect();
    Ok(Dataset::new(x, y, q)?.with_labels(labels)?)
}

fn cmd_fit(args: FitArgs) -> CliResult<()> {
    let file = config::load(args.common.config.as_deref())?;
    init_threads(&args.common, &file)?;
    let est = Estimation::merge(&args.est, &file.estimation)?;
    let data = args
        .data
        .or(file.fit.data.clone())
        .ok_or_else(|| CliError::Usage("no input CSV given".into()))?;
    let y_col = args.y_col.or(file.fit.y_col.clone()).unwrap_or_else(|| "y".into());
    let q_col = args.q_col.or(file.fit.q_col.clone()).unwrap_or_else(|| "q".into());
    let intercept = args.intercept.or(file.fit.intercept).unwrap_or_default();
    let dataset = read_xyq(&data, &y_col, &q_col)?.with_intercept(intercept, false)?;
    let opts = est.fit_options(est.grid(GridKind::Centiles, Some(dataset.q())));
    let (fit, thr) = estimate(&dataset, &opts)?;
    let out = out_dir(&args.common, &file)?;
    let report = FitReport {
        n: dataset.n(),
        m: dataset.m(),
        labels: dataset.labels().to_vec(),
        tau_hat: fit.tau_hat,
        lambda_hat: fit.lambda,
        c_hat: thr.c,
        cutoff: thr.h,
        alpha_hat: fit.alpha_hat.clone(),
        alpha_tilde: thr.alpha_tilde.clone(),
        support_alpha: thr.j_alpha.clone(),
        support_delta: thr.j_delta.clone(),
        break_detected: thr.break_detected,
        converged: fit.all_converged,
        profile: fit
            .profile
            .iter()
            .map(|p| ProfileRow {
                tau: p.tau,
                criterion: p.criterion,
                converged: p.fit.converged,
            })
            .collect(),
        lambda_path: fit.path.clone(),
    };
    write_json(&out.join("fit.json"), &report)?;
    println!(
        "tau_hat {}  lambda {:.6}  C {}  break {}",
        fit.tau_hat,
        fit.lambda,
        thr.c.map_or("-".into(), |c| format!("{c:.1}")),
        if thr.break_detected { "yes" } else { "no" }
    );
    Ok(())
}

fn cmd_growth(args: GrowthArgs) -> CliResult<()> {
    let file = config::load(args.common.config.as_deref())?;
    init_threads(&args.common, &file)?;
    let est = Estimation::merge(&args.est, &file.estimation)?;
    let g = &file.growth;
    let data = args
        .data
        .or(g.data.clone())
        .ok_or_else(|| CliError::Usage("no panel CSV given".into()))?;
    let defaults = PanelSpec::default();
    let from = args.from.or(g.from);
    let to = args.to.or(g.to);
    let filter = match (args.years.or(g.years.clone()), from, to) {
        (Some(ys), None, None) => SampleFilter::Years(ys),
        (None, None, None) => SampleFilter::All,
        (None, f, t) => SampleFilter::YearRange {
            from: f.unwrap_or(i32::MIN),
            to: t.unwrap_or(i32::MAX),
        },
        (Some(_), _, _) => return Err(CliError::Usage("--years excludes --from/--to".into())),
    };
    let mut spec = PanelSpec {
        csv: data,
        country_col: g.country_col.clone().unwrap_or(defaults.country_col),
        year_col: g.year_col.clone().unwrap_or(defaults.year_col),
        gdp_col: g.gdp_col.clone().unwrap_or(defaults.gdp_col),
        controls: args.controls.or(g.controls.clone()).unwrap_or_default(),
        debt_col: args.debt_col.or(g.debt_col.clone()).unwrap_or(defaults.debt_col),
        horizon: args.horizon.or(g.horizon).unwrap_or(defaults.horizon),
        fixed_effects: args.fe || g.fe.unwrap_or(false),
        filter,
        grid: defaults.grid,
        growth_scale: g.growth_scale.unwrap_or(defaults.growth_scale),
        penalize_intercepts: g.penalize_intercepts.unwrap_or(defaults.penalize_intercepts),
    };
    if spec.horizon == 0 {
        return Err(CliError::Usage("--horizon must be positive".into()));
    }
    let panel = build_panel(&spec)?;
    spec.grid = est.grid(GridKind::Centiles, Some(panel.dataset.q()));
    let opts = est.fit_options(spec.grid.clone());
    let report = report_for_panel(&panel, &spec, &opts)?;
    let out = out_dir(&args.common, &file)?;
    let mut csv = Vec::new();
    write_report_csv(&report, &mut csv)?;
    write_file(&out.join("growth.csv"), csv)?;
    let text = format_report_text(&report);
    write_file(&out.join("growth.txt"), &text)?;
    write_json(&out.join("growth.json"), &report)?;
    print!("{text}");
    Ok(())
}

fn cmd_theory(args: TheoryArgs) -> CliResult<bool> {
    let file = config::load(args.common.config.as_deref())?;
    let t = &file.theory;
    let ms = args.m.or(t.m.clone()).unwrap_or(DEFAULT_M.to_vec());
    let rhos = args.rho.or(t.rho.clone()).unwrap_or(DEFAULT_RHO.to_vec());
    let taus = args.tau.or(t.tau.clone()).unwrap_or(DEFAULT_TAU.to_vec());
    let rows: Vec<TheoryRow> = theory_grid(&ms, &rhos, &taus)?;
    let mut text = format!(
        "{:>5} {:>5} {:>5} {:>12} {:>12} {:>12} {:>3}\n",
        "m", "rho", "tau", "theta", "theta_tau", "bound", "ok"
    );
    for r in &rows {
        text.push_str(&format!(
            "{:>5} {:>5} {:>5} {:>12.6} {:>12.6} {:>12.6} {:>3}\n",
            r.spec.m,
            r.spec.rho,
            r.spec.tau,
            r.result.theta_norm,
            r.result.norm,
            r.result.bound,
            if r.result.holds { "ok" } else { "NO" }
        ));
    }
    if args.common.out.is_some() || file.run.out.is_some() {
        let out = out_dir(&args.common, &file)?;
        write_file(&out.join("theory.txt"), &text)?;
        write_json(&out.join("theory.json"), &rows)?;
    }
    print!("{text}");
    Ok(rows.iter().all(|r| r.result.holds))
}

fn run(cli: Cli) -> CliResult<bool> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(a).map(|_| true),
        Command::Fit(a) => cmd_fit(a).map(|_| true),
        Command::Growth(a) => cmd_growth(a).map(|_| true),
        Command::TheoryCheck(a) => cmd_theory(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: bound violated");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
