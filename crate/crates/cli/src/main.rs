//! `robcox`: Cox regression with misspecification-robust Wald and likelihood-ratio
//! inference, plus the simulation studies.
//!
//! Exit codes: 0 success, 2 bad input or I/O, 3 numerical failure, 4 CI bound not bracketable.

mod json;
mod plot;

use std::fs::{self, File};
use std::io::BufReader;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use robcox::cox::{fit, FitOptions, FitResult};
use robcox::inference::{
    lr_ci_from_tester, robust_lr_pvalue, robust_lr_pvalue_joint, robust_wald_ci, InferenceOptions, Method,
    ProfileTester, Side, VarianceMode,
};
use robcox::study::{
    hptn_curve, hr_grid, mc_coverage_methods, rare_sweep, KeyValue, RareTrialSpec, ScenarioSpec, TrialReconstruction,
};
use robcox::{load_csv, CoxError, Dataset};

use plot::{line_chart, Series};

#[derive(Parser)]
#[command(name = "robcox", version, about = "Robust inference for the Cox model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the model and print estimates with sandwich variance.
    Fit(InputArgs),
    /// Confidence interval for one coefficient.
    Ci(CiArgs),
    /// Robust likelihood-ratio test of `beta_index = value`.
    Test(TestArgs),
    /// Monte Carlo coverage under misspecified models.
    Table1(Table1Args),
    /// Exact coverage of upper bounds in a rare-event trial.
    Rare(RareArgs),
    /// Upper hazard-ratio bound as treated events are added.
    Hptn(HptnArgs),
}

#[derive(Args)]
struct InputArgs {
    /// CSV with header `time,status[,weight],z1,...`.
    #[arg(long)]
    input: PathBuf,
    /// Third column holds subject weights.
    #[arg(long)]
    weight_col: bool,
}

#[derive(Args)]
struct CiArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Coefficient, 1-based.
    #[arg(long, default_value_t = 1)]
    index: usize,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// lower, upper or two.
    #[arg(long, default_value = "two")]
    side: Side,
    /// robust-wald, robust-lr or plain-lr.
    #[arg(long, default_value = "robust-lr")]
    method: Method,
    /// Replace the sandwich by the model-based variance (diagnostic).
    #[arg(long)]
    force_scale_one: bool,
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Coefficients, 1-based, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    index: Vec<usize>,
    /// Hypothesised values, one per index (default 0).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    value: Vec<f64>,
    #[arg(long)]
    force_scale_one: bool,
}

#[derive(Args)]
struct StudyArgs {
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Restrict to one method.
    #[arg(long)]
    method: Option<Method>,
    /// key = value settings file.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct Table1Args {
    #[command(flatten)]
    study: StudyArgs,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8,9,10,11,12")]
    rows: Vec<u8>,
    #[arg(long, value_delimiter = ',', default_value = "100,50")]
    n: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct RareArgs {
    #[command(flatten)]
    study: StudyArgs,
    /// Number of hazard ratios in [0.05, 1.2].
    #[arg(long, default_value_t = 40)]
    grid: usize,
    /// One-sided level of the upper bound is `1 - alpha`.
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Args)]
struct HptnArgs {
    #[command(flatten)]
    study: StudyArgs,
    /// Treated-event counts, `a..b` or a single count.
    #[arg(long, default_value = "1..10", value_parser = parse_range)]
    d: RangeInclusive<usize>,
    /// Two-sided alpha.
    #[arg(long, default_value_t = 0.00066)]
    alpha: f64,
}

fn parse_range(s: &str) -> Result<RangeInclusive<usize>, String> {
    let bad = || format!("expected `a..b` or a count, got `{s}`");
    match s.split_once("..") {
        Some((a, b)) => {
            let a: usize = a.trim().parse().map_err(|_| bad())?;
            let b: usize = b.trim_start_matches('=').trim().parse().map_err(|_| bad())?;
            if a > b {
                return Err(bad());
            }
            Ok(a..=b)
        }
        None => {
            let a: usize = s.trim().parse().map_err(|_| bad())?;
            Ok(a..=a)
        }
    }
}

fn exit_code(e: &CoxError) -> u8 {
    match e {
        e if e.is_input_error() => 2,
        CoxError::NotBracketable => 4,
        _ => 3,
    }
}

fn read_dataset(args: &InputArgs) -> Result<Dataset, CoxError> {
    let path = args.input.display().to_string();
    let file = File::open(&args.input).map_err(|source| CoxError::Io {
        path: path.clone(),
        source,
    })?;
    load_csv(BufReader::new(file), args.weight_col).map_err(|e| match e {
        CoxError::Parse { row, message } => CoxError::Parse {
            row,
            message: format!("{path}: {message}"),
        },
        CoxError::Validation { field, row, message } => CoxError::Validation {
            field,
            row,
            message: format!("{message} in {path}"),
        },
        other => other,
    })
}

fn zero_based(index: usize, p: usize) -> Result<usize, CoxError> {
    if index == 0 || index > p {
        return Err(CoxError::InvalidArgument(format!("--index must lie in 1..={p}, got {index}")));
    }
    Ok(index - 1)
}

fn inference_options(force_scale_one: bool, method: Option<Method>) -> InferenceOptions {
    if force_scale_one || method == Some(Method::PlainLr) {
        InferenceOptions::model_based()
    } else {
        InferenceOptions::default()
    }
}

fn cmd_fit(args: &InputArgs) -> Result<Value, CoxError> {
    let ds = read_dataset(args)?;
    let f: FitResult = fit(&ds, &FitOptions::default())?;
    Ok(json!({
        "beta_hat": json::vector(f.beta_hat.iter()),
        "loglik": json::num(f.loglik),
        "se_robust": json::vector(f.robust_se().iter()),
        "a_hat": json::matrix(&f.a_hat),
        "b_hat": json::matrix(&f.b_hat),
        "v_hat": json::matrix(&f.v_hat),
        "converged": f.converged,
        "iterations": f.iterations,
        "separation": f.separation,
    }))
}

fn cmd_ci(args: &CiArgs) -> Result<Value, CoxError> {
    let ds = read_dataset(&args.input)?;
    let index = zero_based(args.index, ds.p())?;
    let opts = inference_options(args.force_scale_one, Some(args.method));
    let full = fit(&ds, &opts.fit)?;
    let ci = match args.method {
        Method::RobustWald => {
            let f = match opts.variance {
                VarianceMode::Robust => full,
                VarianceMode::ModelBased => full.with_model_based_variance()?,
            };
            robust_wald_ci(&f, index, args.level, args.side)?
        }
        Method::RobustLr | Method::PlainLr => {
            let tester = ProfileTester::from_fit(&ds, index, full, &opts)?;
            lr_ci_from_tester(&tester, args.level, args.side)?
        }
    };
    Ok(json!({
        "method": ci.method.as_str(),
        "level": json::num(ci.level),
        "side": ci.side.as_str(),
        "lower": json::num(ci.lower),
        "upper": json::num(ci.upper),
        "lower_hr": json::num(ci.lower.exp()),
        "upper_hr": json::num(ci.upper.exp()),
    }))
}

fn cmd_test(args: &TestArgs) -> Result<Value, CoxError> {
    let ds = read_dataset(&args.input)?;
    let indices = args
        .index
        .iter()
        .map(|&i| zero_based(i, ds.p()))
        .collect::<Result<Vec<_>, _>>()?;
    let values = if args.value.is_empty() {
        vec![0.0; indices.len()]
    } else if args.value.len() == indices.len() {
        args.value.clone()
    } else {
        return Err(CoxError::InvalidArgument("--value needs one entry per --index".into()));
    };
    let opts = inference_options(args.force_scale_one, None);
    let t = if indices.len() == 1 {
        robust_lr_pvalue(&ds, indices[0], values[0], &opts)?
    } else {
        robust_lr_pvalue_joint(&ds, &indices, &values, &opts)?
    };
    Ok(json!({
        "stat": json::num(t.stat),
        "weights": json::vector(t.weights.as_slice().iter()),
        "z": json::opt(t.z),
        "p_two_sided": json::num(t.p_two_sided),
        "p_less": json::opt(t.p_less),
        "p_greater": json::opt(t.p_greater),
    }))
}

fn study_methods(args: &StudyArgs) -> Vec<Method> {
    match args.method {
        Some(m) => vec![m],
        None => vec![Method::RobustWald, Method::RobustLr],
    }
}

fn read_config<T: KeyValue>(path: &Option<PathBuf>) -> Result<Option<T>, CoxError> {
    let Some(path) = path else { return Ok(None) };
    let text = fs::read_to_string(path).map_err(|source| CoxError::Io {
        path: path.display().to_string(),
        source,
    })?;
    T::from_kv(&text).map(Some)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CoxError + '_ {
    move |source| CoxError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `<out>/<name>.csv` and `<out>/<name>.svg`.
fn write_outputs(
    out: &Path,
    name: &str,
    header: &[&str],
    rows: &[Vec<String>],
    chart: String,
) -> Result<Vec<PathBuf>, CoxError> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    let csv_path = out.join(format!("{name}.csv"));
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| CoxError::Io {
        path: csv_path.display().to_string(),
        source: e.into(),
    })?;
    let csv_err = |e: csv::Error| CoxError::Io {
        path: csv_path.display().to_string(),
        source: e.into(),
    };
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(&csv_path))?;
    let svg_path = out.join(format!("{name}.svg"));
    fs::write(&svg_path, chart).map_err(io_err(&svg_path))?;
    Ok(vec![csv_path, svg_path])
}

fn files_json(files: Vec<PathBuf>) -> Value {
    json!({ "files": files.iter().map(|p| p.display().to_string()).collect::<Vec<_>>() })
}

fn cmd_table1(args: &Table1Args) -> Result<Value, CoxError> {
    if args.reps == 0 {
        return Err(CoxError::InvalidArgument("--reps must be >= 1".into()));
    }
    let scenarios = match read_config::<ScenarioSpec>(&args.study.config)? {
        Some(s) => vec![s],
        None => {
            let mut v = Vec::new();
            for &n in &args.n {
                for &row in &args.rows {
                    v.push(ScenarioSpec::new(row, n, args.seed)?);
                }
            }
            v
        }
    };
    let methods = study_methods(&args.study);
    let mut rows = Vec::new();
    let mut series: Vec<Series> = Vec::new();
    for s in &scenarios {
        for r in mc_coverage_methods(s, &methods, args.reps)? {
            rows.push(vec![
                s.row_id.to_string(),
                s.n.to_string(),
                r.method.to_string(),
                r.coverage.to_string(),
                r.mean_width.to_string(),
                r.mc_se.to_string(),
            ]);
            let label = format!("{} n={}", r.method, s.n);
            match series.iter_mut().find(|x| x.label == label) {
                Some(x) => x.points.push((s.row_id as f64, r.coverage)),
                None => series.push(Series {
                    label,
                    points: vec![(s.row_id as f64, r.coverage)],
                }),
            }
        }
    }
    let chart = line_chart("Coverage of 95% intervals", "model (row)", "coverage", &series);
    let files = write_outputs(
        &args.study.out,
        "table1",
        &["row", "n", "method", "coverage", "width", "mc_se"],
        &rows,
        chart,
    )?;
    Ok(files_json(files))
}

fn cmd_rare(args: &RareArgs) -> Result<Value, CoxError> {
    let mut spec = read_config::<RareTrialSpec>(&args.study.config)?.unwrap_or_default();
    if let Some(a) = args.alpha {
        spec.alpha = a;
    }
    spec.check()?;
    let grid = hr_grid(0.05, 1.2, args.grid);
    let mut rows = Vec::new();
    let mut series = Vec::new();
    for m in study_methods(&args.study) {
        let sweep = rare_sweep(&spec, m, &grid)?;
        for &(hr, cov) in &sweep {
            rows.push(vec![hr.to_string(), m.to_string(), cov.to_string()]);
        }
        series.push(Series {
            label: m.to_string(),
            points: sweep,
        });
    }
    let chart = line_chart("Coverage of the upper bound", "true hazard ratio", "coverage", &series);
    let files = write_outputs(&args.study.out, "rare_coverage", &["true_hr", "method", "coverage"], &rows, chart)?;
    Ok(files_json(files))
}

fn cmd_hptn(args: &HptnArgs) -> Result<Value, CoxError> {
    let recon = read_config::<TrialReconstruction>(&args.study.config)?.unwrap_or_default();
    let mut rows = Vec::new();
    let mut series = Vec::new();
    for m in study_methods(&args.study) {
        let curve = hptn_curve(&recon, args.d.clone(), args.alpha, m)?;
        for p in &curve {
            rows.push(vec![p.d.to_string(), m.to_string(), p.upper_hr.to_string()]);
        }
        series.push(Series {
            label: m.to_string(),
            points: curve.iter().map(|p| (p.d as f64, p.upper_hr)).collect(),
        });
    }
    let chart = line_chart("Upper hazard-ratio bound", "treated-arm events", "upper bound", &series);
    let files = write_outputs(&args.study.out, "hptn_curve", &["d", "method", "upper_hr"], &rows, chart)?;
    Ok(files_json(files))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Ci(a) => cmd_ci(a),
        Command::Test(a) => cmd_test(a),
        Command::Table1(a) => cmd_table1(a),
        Command::Rare(a) => cmd_rare(a),
        Command::Hptn(a) => cmd_hptn(a),
    };
    match result {
        Ok(v) => {
            println!("{}", serde_json::to_string_pretty(&v).expect("json values serialize"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("robcox: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
