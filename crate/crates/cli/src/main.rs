//! `gpforecast`: fit, predict, cross-validate and score incidence forecasts.
//!
//! Exit status is 0 on success, 2 for configuration errors (bad flags,
//! out-of-range `train_end`, empty ranges) and 1 when a pipeline stage
//! fails; the message names the stage.

mod config;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use gpforecast::data::{self, Covariates, DataError, Month, RawRecord};
use gpforecast::eval::{self, MetricReport};
use gpforecast::optimizer::{FitConfig, DEFAULT_RESTARTS};
use gpforecast::persist::{ModelDocument, ToolInfo};
use gpforecast::{pipeline, Param};
use serde::Serialize;

use config::ConfigFile;

pub const PREDICTION_HEADER: [&str; 7] = [
    "period",
    "mean_transformed",
    "lo95_transformed",
    "hi95_transformed",
    "mean_count",
    "lo95_count",
    "hi95_count",
];

#[derive(Parser)]
#[command(name = "gpforecast", version, about = "Gaussian-process incidence forecasting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit hyperparameters and write a model document.
    Fit(FitArgs),
    /// Predict a range of months with a saved model.
    Predict(PredictArgs),
    /// Blocked k-fold cross-validation.
    Cv(CvArgs),
    /// Score a prediction CSV against actual counts.
    Eval(EvalArgs),
    /// Seasonal-naive predictions for the months after `--train-end`.
    Baseline(BaselineArgs),
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    /// Last training month, YYYY-MM.
    #[arg(long)]
    train_end: Option<Month>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// `key = value` file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// Monthly (or weekly) CSV carrying covariates for the requested months.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    from: Month,
    #[arg(long)]
    to: Month,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CvArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    restarts: Option<usize>,
    /// Only cross-validate months up to and including this one.
    #[arg(long)]
    train_end: Option<Month>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// CSV with `period` and `mean_count` columns.
    #[arg(long)]
    pred: PathBuf,
    /// Data CSV (uses `incidence`) or another prediction CSV (uses `mean_count`).
    #[arg(long)]
    actual: PathBuf,
    /// Also write the metrics as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    train_end: Month,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Stage { stage: &'static str, source: anyhow::Error },
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Stage { stage, source } => write!(f, "{stage} failed: {source:#}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Stage { .. } => 1,
        }
    }
}

fn stage<E: Into<anyhow::Error>>(name: &'static str) -> impl FnOnce(E) -> CliError {
    move |e| CliError::Stage {
        stage: name,
        source: e.into(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Cv(a) => cmd_cv(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Baseline(a) => cmd_baseline(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gpforecast: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

// ---------------------------------------------------------------------------
// Shared plumbing.

fn load_monthly(path: &Path) -> Result<Vec<RawRecord>, CliError> {
    let recs = data::load_csv(path)
        .with_context(|| path.display().to_string())
        .map_err(stage("ingest"))?;
    data::to_monthly(recs).map_err(stage("aggregate"))
}

fn training_rows(monthly: &[RawRecord], train_end: Month) -> Result<data::Dataset, CliError> {
    data::build_training_set(monthly, train_end).map_err(|e| match e {
        DataError::TrainEndOutOfRange { .. } => CliError::Config(e.to_string()),
        e => stage("split")(e),
    })
}

#[derive(Serialize)]
struct Meta<'a> {
    tool: ToolInfo,
    command: &'a str,
    config: &'a BTreeMap<String, String>,
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .with_context(|| path.display().to_string())
        .map_err(stage("write"))
}

/// `<path>.meta.json` beside a CSV output.
fn write_meta(path: &Path, command: &str, config: &BTreeMap<String, String>) -> Result<(), CliError> {
    let meta = Meta {
        tool: ToolInfo::default(),
        command,
        config,
    };
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    let text = serde_json::to_string_pretty(&meta).map_err(stage("write"))? + "\n";
    write_file(Path::new(&name), text)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn prediction_csv(periods: &[Month], cols: [&[Option<f64>]; 6]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(PREDICTION_HEADER).map_err(stage("write"))?;
    for (i, m) in periods.iter().enumerate() {
        let mut row = vec![m.to_string()];
        row.extend(cols.iter().map(|c| fmt_opt(c[i])));
        w.write_record(&row).map_err(stage("write"))?;
    }
    w.into_inner().map_err(|e| stage("write")(anyhow::anyhow!(e.to_string())))
}

fn some(v: &[f64]) -> Vec<Option<f64>> {
    v.iter().copied().map(Some).collect()
}

fn print_metrics(r: &MetricReport) {
    println!("n                 {}", r.n);
    println!("rmse_transformed  {}", r.rmse_transformed);
    println!("mad_transformed   {}", r.mad_transformed);
    println!("rmse_counts       {}", r.rmse_counts);
    println!("mad_counts        {}", r.mad_counts);
}

// ---------------------------------------------------------------------------
// Commands.

const FIT_KEYS: &[&str] = &["data", "train_end", "restarts", "seed", "out"];
const CV_KEYS: &[&str] = &["data", "k", "seed", "restarts", "train_end", "out"];

fn restarts_checked(n: Option<usize>) -> Result<usize, CliError> {
    match n.unwrap_or(DEFAULT_RESTARTS) {
        0 => Err(CliError::Config("restarts must be at least 1".into())),
        n => Ok(n),
    }
}

fn cmd_fit(a: FitArgs) -> Result<(), CliError> {
    let cfg = ConfigFile::load(a.config.as_deref(), FIT_KEYS)?;
    let data_path: PathBuf = cfg.require("data", a.data)?;
    let train_end: Month = cfg.require("train_end", a.train_end)?;
    let restarts = restarts_checked(cfg.pick("restarts", a.restarts)?)?;
    let seed: u64 = cfg.pick("seed", a.seed)?.unwrap_or(0);
    let out: PathBuf = cfg.require("out", a.out)?;

    let monthly = load_monthly(&data_path)?;
    let train = training_rows(&monthly, train_end)?;
    let fit_cfg = FitConfig {
        restarts,
        seed,
        ..FitConfig::default()
    };
    let fc = pipeline::train(&train, &fit_cfg).map_err(stage("fit"))?;

    let echo = BTreeMap::from([
        ("command".to_string(), "fit".to_string()),
        ("data".to_string(), data_path.display().to_string()),
        ("train_end".to_string(), train_end.to_string()),
        ("restarts".to_string(), restarts.to_string()),
        ("seed".to_string(), seed.to_string()),
    ]);
    let doc = ModelDocument::from_forecaster(&fc, echo);
    write_file(&out, doc.to_json().map_err(stage("write"))?)?;

    let optim = fc.optim.as_ref().expect("trained with search");
    println!("model written to {}", out.display());
    println!(
        "train rows {} ({}..={})",
        train.len(),
        train.periods[0],
        train.periods[train.len() - 1]
    );
    println!(
        "final nll {}  iterations {}  converged {} ({:?}, restart {})",
        optim.final_nll, optim.iterations, optim.converged, optim.termination, optim.restart_index
    );
    let nat = fc.model.theta().natural_values();
    for p in Param::ALL {
        println!("  {:<8} {}", p.name(), nat[p.index()]);
    }
    Ok(())
}

fn cmd_predict(a: PredictArgs) -> Result<(), CliError> {
    if a.from > a.to {
        return Err(CliError::Config(format!(
            "empty prediction range: --from {} is after --to {}",
            a.from, a.to
        )));
    }
    let doc = ModelDocument::load(&a.model)
        .with_context(|| a.model.display().to_string())
        .map_err(stage("load model"))?;
    let fc = doc.into_forecaster().map_err(stage("load model"))?;
    let monthly = load_monthly(&a.data)?;

    let by_month: BTreeMap<Month, Covariates> = monthly
        .iter()
        .filter_map(|r| r.month().map(|m| (m, r.covariates())))
        .collect();
    let periods: Vec<Month> = std::iter::successors(Some(a.from), |m| Some(m.next()))
        .take_while(|m| *m <= a.to)
        .collect();
    let missing: Vec<String> = periods
        .iter()
        .filter(|m| !by_month.contains_key(m))
        .map(Month::to_string)
        .collect();
    if !missing.is_empty() {
        return Err(stage("covariates")(anyhow::anyhow!(
            "no covariates for {} requested month(s): {}",
            missing.len(),
            missing.join(", ")
        )));
    }
    let raw: Vec<Covariates> = periods.iter().map(|m| by_month[m]).collect();
    let f = fc.forecast_rows(&periods, &raw).map_err(stage("predict"))?;

    let csv = prediction_csv(
        &periods,
        [
            &some(&f.mean_transformed),
            &some(&f.lo95_transformed),
            &some(&f.hi95_transformed),
            &some(&f.mean_count),
            &some(&f.lo95_count),
            &some(&f.hi95_count),
        ],
    )?;
    write_file(&a.out, csv)?;
    let echo = BTreeMap::from([
        ("command".to_string(), "predict".to_string()),
        ("model".to_string(), a.model.display().to_string()),
        ("data".to_string(), a.data.display().to_string()),
        ("from".to_string(), a.from.to_string()),
        ("to".to_string(), a.to.to_string()),
    ]);
    write_meta(&a.out, "predict", &echo)?;
    if f.clamped > 0 {
        eprintln!("note: {} predictive variance(s) clamped at zero", f.clamped);
    }
    println!("{} months written to {}", periods.len(), a.out.display());
    Ok(())
}

#[derive(Serialize)]
struct CvDocument<'a> {
    tool: ToolInfo,
    config: &'a BTreeMap<String, String>,
    report: &'a eval::CvReport,
}

fn cmd_cv(a: CvArgs) -> Result<(), CliError> {
    let cfg = ConfigFile::load(a.config.as_deref(), CV_KEYS)?;
    let data_path: PathBuf = cfg.require("data", a.data)?;
    let k: usize = cfg.pick("k", a.k)?.unwrap_or(10);
    if k < 2 {
        return Err(CliError::Config(format!("k must be at least 2, got {k}")));
    }
    let seed: u64 = cfg.pick("seed", a.seed)?.unwrap_or(0);
    let restarts = restarts_checked(cfg.pick("restarts", a.restarts)?)?;
    let train_end: Option<Month> = cfg.pick("train_end", a.train_end)?;
    let out: PathBuf = cfg.require("out", a.out)?;

    let monthly = load_monthly(&data_path)?;
    let ds = match train_end {
        Some(end) => training_rows(&monthly, end)?,
        None => data::build_full(&monthly).map_err(stage("split"))?,
    };
    if ds.len() < 2 * k {
        return Err(CliError::Config(format!(
            "k = {k} needs at least {} months, data has {}",
            2 * k,
            ds.len()
        )));
    }
    let fit_cfg = FitConfig {
        restarts,
        seed,
        ..FitConfig::default()
    };
    let report = eval::blocked_kfold(&ds, k, &fit_cfg).map_err(stage("cv"))?;

    let mut echo = BTreeMap::from([
        ("command".to_string(), "cv".to_string()),
        ("data".to_string(), data_path.display().to_string()),
        ("k".to_string(), k.to_string()),
        ("seed".to_string(), seed.to_string()),
        ("restarts".to_string(), restarts.to_string()),
    ]);
    if let Some(end) = train_end {
        echo.insert("train_end".to_string(), end.to_string());
    }
    std::fs::create_dir_all(&out)
        .with_context(|| out.display().to_string())
        .map_err(stage("write"))?;
    let doc = CvDocument {
        tool: ToolInfo::default(),
        config: &echo,
        report: &report,
    };
    write_file(
        &out.join("cv_report.json"),
        serde_json::to_string_pretty(&doc).map_err(stage("write"))? + "\n",
    )?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv).map_err(stage("write"))?;
    let csv_path = out.join("cv_folds.csv");
    write_file(&csv_path, csv)?;
    write_meta(&csv_path, "cv", &echo)?;

    println!("{k}-fold blocked CV over {} months", ds.len());
    println!("fold  months              rmse_t    mad_t     p");
    for f in &report.folds {
        println!(
            "{:>4}  {}..{}  {:.5}  {:.5}  {:.3}",
            f.fold,
            f.first_period,
            f.last_period,
            f.metrics.rmse_transformed,
            f.metrics.mad_transformed,
            f.theta.natural().p
        );
    }
    println!(
        "mean rmse_transformed {:.5} (sd {:.5}), mad_transformed {:.5} (sd {:.5})",
        report.mean.rmse_transformed, report.std.rmse_transformed, report.mean.mad_transformed, report.std.mad_transformed
    );
    println!("reports written to {}", out.display());
    Ok(())
}

/// `(period, value)` pairs from the named column of a CSV.
fn read_column(path: &Path, column: &str) -> anyhow::Result<Vec<(Month, f64)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| path.display().to_string())?;
    let headers = rdr.headers()?.clone();
    let idx = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .with_context(|| format!("{}: missing column `{name}`", path.display()))
    };
    let (pi, vi) = (idx("period")?, idx(column)?);
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let ctx = || format!("{} line {}", path.display(), line + 2);
        let m: Month = rec[pi].parse().map_err(anyhow::Error::msg).with_context(ctx)?;
        let v: f64 = rec[vi].parse().with_context(ctx)?;
        out.push((m, v));
    }
    Ok(out)
}

fn has_column(path: &Path, column: &str) -> anyhow::Result<bool> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| path.display().to_string())?;
    Ok(rdr.headers()?.iter().any(|h| h == column))
}

fn cmd_eval(a: EvalArgs) -> Result<(), CliError> {
    let pred = read_column(&a.pred, "mean_count").map_err(stage("read predictions"))?;
    let actual: BTreeMap<Month, f64> = if has_column(&a.actual, "incidence").map_err(stage("read actuals"))? {
        load_monthly(&a.actual)?
            .iter()
            .filter_map(|r| r.month().map(|m| (m, r.incidence as f64)))
            .collect()
    } else {
        read_column(&a.actual, "mean_count")
            .map_err(stage("read actuals"))?
            .into_iter()
            .collect()
    };
    if pred.is_empty() {
        return Err(stage("join")(anyhow::anyhow!("prediction file has no rows")));
    }
    let unmatched: Vec<String> = pred
        .iter()
        .filter(|(m, _)| !actual.contains_key(m))
        .map(|(m, _)| m.to_string())
        .collect();
    if !unmatched.is_empty() {
        return Err(stage("join")(anyhow::anyhow!(
            "{} predicted period(s) have no actual value: {}",
            unmatched.len(),
            unmatched.join(", ")
        )));
    }
    let pc: Vec<f64> = pred.iter().map(|(_, v)| v.max(0.0)).collect();
    let ac: Vec<f64> = pred.iter().map(|(m, _)| actual[m]).collect();
    let pt: Vec<f64> = pc.iter().map(|v| v.ln_1p()).collect();
    let at: Vec<f64> = ac.iter().map(|v| v.ln_1p()).collect();
    let report = MetricReport::compute(&pt, &at, &pc, &ac).map_err(stage("score"))?;
    print_metrics(&report);

    if let Some(out) = &a.out {
        let echo = BTreeMap::from([
            ("command".to_string(), "eval".to_string()),
            ("pred".to_string(), a.pred.display().to_string()),
            ("actual".to_string(), a.actual.display().to_string()),
        ]);
        #[derive(Serialize)]
        struct EvalDocument<'a> {
            tool: ToolInfo,
            config: &'a BTreeMap<String, String>,
            metrics: &'a MetricReport,
        }
        let doc = EvalDocument {
            tool: ToolInfo::default(),
            config: &echo,
            metrics: &report,
        };
        write_file(out, serde_json::to_string_pretty(&doc).map_err(stage("write"))? + "\n")?;
    }
    Ok(())
}

fn cmd_baseline(a: BaselineArgs) -> Result<(), CliError> {
    let monthly = load_monthly(&a.data)?;
    let (train, test) = data::build_dataset(&monthly, a.train_end).map_err(|e| match e {
        DataError::EmptySplit(_) => CliError::Config(format!("train_end {}: {e}", a.train_end)),
        e => stage("split")(e),
    })?;
    let (preds, state) = eval::seasonal_naive(&train, &test).map_err(stage("baseline"))?;
    let counts = gpforecast::transform::inverse(&preds, &state);
    let none = vec![None; preds.len()];
    let csv = prediction_csv(&test.periods, [&some(&preds), &none, &none, &some(&counts), &none, &none])?;
    write_file(&a.out, csv)?;
    let echo = BTreeMap::from([
        ("command".to_string(), "baseline".to_string()),
        ("data".to_string(), a.data.display().to_string()),
        ("train_end".to_string(), a.train_end.to_string()),
    ]);
    write_meta(&a.out, "baseline", &echo)?;
    println!("{} seasonal-naive months written to {}", test.len(), a.out.display());
    Ok(())
}
