//! The `dhawkes` command line.
//!
//! Settings come from built-in defaults, then an optional TOML file
//! (`--config`), then command-line flags; later sources win. Every JSON
//! output carries a `provenance` block with the seed, a hash of the
//! effective configuration and the crate version, and every CSV is written
//! next to a JSON file of the same stem that carries it.
//!
//! Exit codes: 0 success, 2 input error, 3 non-convergence, 4 numerical failure.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{Duration, NaiveDateTime, NaiveTime};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HawkesError, Result};
use crate::estimator::{cross_validate_lambda, fit, FitConfig, FitReportJson, Variant};
use crate::evaluator::{forecast, interarrival_check, predictive_loglik, triggering_report, InterarrivalConfig};
use crate::ingest::{bin_events, parse_timestamp, read_raw_events, ward_labels};
use crate::likelihood::{loglik_event_form, loglik_naive, loglik_recursive};
use crate::params::{MarkedParams, UnmarkedParams, UnmarkedParamsRepr};
use crate::season::{estimate_seasonal_profile, SeasonalProfile};
use crate::series::{BinnedSeries, Event};
use crate::simulator::{estimate_alarm_prob, simulate_naive, simulate_recursive, SimConfig};
use crate::unmarked::{u_simulate, SimMode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

/// Exit code for an error.
pub fn exit_code(err: &HawkesError) -> i32 {
    match err {
        HawkesError::Optimizer(_) => EXIT_NOT_CONVERGED,
        HawkesError::Numerical(_)
        | HawkesError::VanishingIntensity { .. }
        | HawkesError::Explosive { .. }
        | HawkesError::HorizonExceeded { .. } => EXIT_NUMERICAL,
        _ => EXIT_INPUT,
    }
}

/// Everything a run can be configured with. All fields are optional so
/// that a file and the flags can each supply a subset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Raw `timestamp,ward,alarm` CSV for `ingest`.
    pub input: Option<PathBuf>,
    /// Directory written by `ingest`.
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub bin_minutes: Option<u32>,
    /// Span `[start, end)`; defaults to whole days around the records.
    pub start: Option<String>,
    pub end: Option<String>,
    /// Train / validation / test fractions.
    pub splits: Option<[f64; 3]>,
    pub variant: Option<Variant>,
    pub lambda_h: Option<f64>,
    pub grid: Option<Vec<f64>>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    /// Fitted parameters (a `fit` output) for simulate/forecast/evaluate.
    pub params: Option<PathBuf>,
    /// Unmarked per-pair parameters for `simulate`.
    pub unmarked_params: Option<PathBuf>,
    pub fits: Option<Vec<PathBuf>>,
    pub n_bins: Option<usize>,
    pub p_alarm: Option<f64>,
    pub mode: Option<String>,
    pub n_sims: Option<usize>,
    pub horizon_bins: Option<usize>,
    pub bin_hours: Option<f64>,
    pub n_buckets: Option<usize>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident, $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl RunConfig {
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| HawkesError::InvalidParameter(format!("{}: {e}", path.display())))
    }

    /// Fields set in `other` replace those in `self`.
    pub fn overlay(&mut self, other: &RunConfig) {
        overlay!(
            self, other, input, data, out, bin_minutes, start, end, splits, variant, lambda_h, grid, max_iters,
            tol, seed, params, unmarked_params, fits, n_bins, p_alarm, mode, n_sims, horizon_bins, bin_hours,
            n_buckets
        );
    }

    /// SHA-256 of the canonical JSON form, output directory excluded.
    pub fn hash(&self, command: &str) -> String {
        let mut c = self.clone();
        c.out = None;
        let body = serde_json::to_vec(&(command, &c)).expect("config serializes");
        Sha256::digest(&body).iter().map(|b| format!("{b:02x}")).collect()
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn out(&self) -> Result<&Path> {
        self.out.as_deref().ok_or_else(|| missing("out"))
    }

    fn data(&self) -> Result<&Path> {
        self.data.as_deref().ok_or_else(|| missing("data"))
    }

    fn splits(&self) -> Result<[f64; 3]> {
        let s = self.splits.unwrap_or([0.75, 0.10, 0.15]);
        if s.iter().any(|v| !(*v > 0.0)) || (s.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(HawkesError::InvalidParameter(format!(
                "split fractions must be positive and sum to 1, got {s:?}"
            )));
        }
        Ok(s)
    }

    fn fit_config(&self) -> FitConfig {
        let d = FitConfig::default();
        FitConfig {
            variant: self.variant.unwrap_or(d.variant),
            lambda_h: self.lambda_h.unwrap_or(d.lambda_h),
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            tol: self.tol.unwrap_or(d.tol),
            seed: self.seed(),
            ..d
        }
    }
}

fn missing(name: &str) -> HawkesError {
    HawkesError::InvalidParameter(format!("`{name}` is required (flag or config file)"))
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Provenance {
    pub seed: u64,
    pub config_hash: String,
    pub version: String,
}

struct Run {
    command: &'static str,
    config: RunConfig,
}

impl Run {
    fn provenance(&self) -> Provenance {
        Provenance {
            seed: self.config.seed(),
            config_hash: self.config.hash(self.command),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    fn provenance_value(&self) -> serde_json::Value {
        serde_json::json!({ "provenance": self.provenance() })
    }

    fn write_json<T: Serialize>(&self, dir: &Path, stem: &str, body: &T) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut value = serde_json::to_value(body)?;
        if let serde_json::Value::Object(obj) = &mut value {
            obj.insert("provenance".into(), serde_json::to_value(self.provenance())?);
        }
        let mut f = File::create(dir.join(format!("{stem}.json")))?;
        serde_json::to_writer_pretty(&mut f, &value)?;
        writeln!(f)?;
        Ok(())
    }

    fn write_csv<T: Serialize>(&self, dir: &Path, stem: &str, rows: &[T], header: &[&str]) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join(format!("{stem}.csv")))?;
        if rows.is_empty() {
            w.write_record(header)?;
        }
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn parse_splits(text: &str) -> std::result::Result<[f64; 3], String> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    <[f64; 3]>::try_from(parts).map_err(|p| format!("expected three fractions, got {}", p.len()))
}

#[derive(Debug, Parser)]
#[command(name = "dhawkes", version, about = "Marked multivariate discrete-time Hawkes processes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct Common {
    /// TOML file with run settings; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bin a raw event CSV and write train/validation/test splits.
    Ingest {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        bin_minutes: Option<u32>,
        #[arg(long)]
        start: Option<String>,
        #[arg(long)]
        end: Option<String>,
        /// Comma-separated train,val,test fractions.
        #[arg(long, value_parser = parse_splits)]
        splits: Option<[f64; 3]>,
        #[command(flatten)]
        common: Common,
    },
    /// Fit one model variant on the training split.
    Fit {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        variant: Option<Variant>,
        #[arg(long)]
        lambda_h: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Choose the ridge weight on the validation split.
    Cv {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        variant: Option<Variant>,
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Simulate a series from fitted (or unmarked per-pair) parameters.
    Simulate {
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        unmarked_params: Option<PathBuf>,
        #[arg(long)]
        n_bins: Option<usize>,
        #[arg(long)]
        p_alarm: Option<f64>,
        /// `naive` or `recursive`.
        #[arg(long)]
        mode: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Per-ward count distributions after the train+validation history.
    Forecast {
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        horizon_bins: Option<usize>,
        #[arg(long)]
        n_sims: Option<usize>,
        #[arg(long)]
        p_alarm: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Predictive log-likelihood, triggering shares and interarrival check on the test split.
    Evaluate {
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        n_sims: Option<usize>,
        #[arg(long)]
        bin_hours: Option<f64>,
        #[arg(long)]
        n_buckets: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Compare several fitted models on the test split.
    Report {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        fits: Option<Vec<PathBuf>>,
        #[command(flatten)]
        common: Common,
    },
    /// Time the three likelihood evaluators as the event count grows tenfold.
    Bench {
        #[arg(long)]
        n_bins: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Ingest { .. } => "ingest",
            Self::Fit { .. } => "fit",
            Self::Cv { .. } => "cv",
            Self::Simulate { .. } => "simulate",
            Self::Forecast { .. } => "forecast",
            Self::Evaluate { .. } => "evaluate",
            Self::Report { .. } => "report",
            Self::Bench { .. } => "bench",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Self::Ingest { common, .. }
            | Self::Fit { common, .. }
            | Self::Cv { common, .. }
            | Self::Simulate { common, .. }
            | Self::Forecast { common, .. }
            | Self::Evaluate { common, .. }
            | Self::Report { common, .. }
            | Self::Bench { common, .. } => common,
        }
    }

    /// The settings given as flags.
    fn flags(&self) -> RunConfig {
        let c = self.common();
        let mut r = RunConfig {
            out: c.out.clone(),
            seed: c.seed,
            ..RunConfig::default()
        };
        match self {
            Self::Ingest { input, bin_minutes, start, end, splits, .. } => {
                r.input = input.clone();
                r.bin_minutes = *bin_minutes;
                r.start = start.clone();
                r.end = end.clone();
                r.splits = *splits;
            }
            Self::Fit { data, variant, lambda_h, max_iters, tol, .. } => {
                r.data = data.clone();
                r.variant = *variant;
                r.lambda_h = *lambda_h;
                r.max_iters = *max_iters;
                r.tol = *tol;
            }
            Self::Cv { data, variant, grid, max_iters, tol, .. } => {
                r.data = data.clone();
                r.variant = *variant;
                r.grid = grid.clone();
                r.max_iters = *max_iters;
                r.tol = *tol;
            }
            Self::Simulate { params, unmarked_params, n_bins, p_alarm, mode, .. } => {
                r.params = params.clone();
                r.unmarked_params = unmarked_params.clone();
                r.n_bins = *n_bins;
                r.p_alarm = *p_alarm;
                r.mode = mode.clone();
            }
            Self::Forecast { params, data, horizon_bins, n_sims, p_alarm, .. } => {
                r.params = params.clone();
                r.data = data.clone();
                r.horizon_bins = *horizon_bins;
                r.n_sims = *n_sims;
                r.p_alarm = *p_alarm;
            }
            Self::Evaluate { params, data, n_sims, bin_hours, n_buckets, .. } => {
                r.params = params.clone();
                r.data = data.clone();
                r.n_sims = *n_sims;
                r.bin_hours = *bin_hours;
                r.n_buckets = *n_buckets;
            }
            Self::Report { data, fits, .. } => {
                r.data = data.clone();
                r.fits = fits.clone();
            }
            Self::Bench { n_bins, .. } => r.n_bins = *n_bins,
        }
        r
    }
}

/// Parses `args`, runs the command, prints any error and returns the exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match run(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs a parsed command and returns its exit code.
pub fn run(command: &Command) -> Result<i32> {
    let mut config = match &command.common().config {
        Some(path) => RunConfig::from_toml_file(path)?,
        None => RunConfig::default(),
    };
    config.overlay(&command.flags());
    let run = Run {
        command: command.name(),
        config,
    };
    match command {
        Command::Ingest { .. } => cmd_ingest(&run),
        Command::Fit { .. } => cmd_fit(&run),
        Command::Cv { .. } => cmd_cv(&run),
        Command::Simulate { .. } => cmd_simulate(&run),
        Command::Forecast { .. } => cmd_forecast(&run),
        Command::Evaluate { .. } => cmd_evaluate(&run),
        Command::Report { .. } => cmd_report(&run),
        Command::Bench { .. } => cmd_bench(&run),
    }
}

/// Written by `ingest` next to the series files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub wards: Vec<String>,
    pub start: String,
    pub end: String,
    pub bin_minutes: u32,
    pub n_bins: usize,
    pub n_records: usize,
    /// Inclusive bin ranges in the full series.
    pub train: [usize; 2],
    pub val: [usize; 2],
    pub test: [usize; 2],
}

fn parse_time(text: &str, what: &str) -> Result<NaiveDateTime> {
    parse_timestamp(text).ok_or_else(|| HawkesError::InvalidParameter(format!("cannot parse {what} `{text}`")))
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Chronological split points, each rounded to the nearest whole hour.
fn split_points(n_bins: usize, bin_minutes: u32, fractions: [f64; 3]) -> Result<(usize, usize)> {
    let bm = bin_minutes as usize;
    let unit = 60 / gcd(60, bm);
    let round = |x: f64| ((x / unit as f64).round() as usize) * unit;
    let a = round(fractions[0] * n_bins as f64);
    let b = round((fractions[0] + fractions[1]) * n_bins as f64);
    if a == 0 || b <= a || b >= n_bins {
        return Err(HawkesError::InvalidParameter(format!(
            "span of {n_bins} bins is too short for hour-aligned splits {fractions:?}"
        )));
    }
    Ok((a, b))
}

fn cmd_ingest(run: &Run) -> Result<i32> {
    let c = &run.config;
    let input = c.input.as_deref().ok_or_else(|| missing("input"))?;
    let out = c.out()?;
    let records = read_raw_events(File::open(input)?)?;
    if records.is_empty() {
        return Err(HawkesError::InvalidSeries(format!("{} has no records", input.display())));
    }
    let bin_minutes = c.bin_minutes.unwrap_or(5);
    let first = records.iter().map(|r| r.timestamp).min().expect("non-empty");
    let last = records.iter().map(|r| r.timestamp).max().expect("non-empty");
    let start = match &c.start {
        Some(s) => parse_time(s, "start")?,
        None => first.date().and_time(NaiveTime::MIN),
    };
    let end = match &c.end {
        Some(s) => parse_time(s, "end")?,
        None => last.date().and_time(NaiveTime::MIN) + Duration::days(1),
    };
    let wards = ward_labels(&records);
    let series = bin_events(&records, &wards, bin_minutes, start, end)?;
    let (a, b) = split_points(series.n_bins(), bin_minutes, run.config.splits()?)?;
    let train = series.slice(1, a)?;
    let val = series.slice(a + 1, b)?;
    let test = series.slice(b + 1, series.n_bins())?;
    let season = estimate_seasonal_profile(&train)?;

    let prov = run.provenance_value();
    series.save(out, "series", Some(prov.clone()))?;
    train.save(out, "train", Some(prov.clone()))?;
    val.save(out, "val", Some(prov.clone()))?;
    test.save(out, "test", Some(prov))?;
    run.write_json(out, "season", &serde_json::json!({ "season": season.values() }))?;
    let manifest = Manifest {
        wards,
        start: start.format("%Y-%m-%dT%H:%M").to_string(),
        end: end.format("%Y-%m-%dT%H:%M").to_string(),
        bin_minutes,
        n_bins: series.n_bins(),
        n_records: records.len(),
        train: [1, a],
        val: [a + 1, b],
        test: [b + 1, series.n_bins()],
    };
    run.write_json(out, "manifest", &manifest)?;
    println!(
        "{} records → {} wards × {} bins (train {}, val {}, test {})",
        records.len(),
        series.dims(),
        series.n_bins(),
        train.n_bins(),
        val.n_bins(),
        test.n_bins()
    );
    Ok(EXIT_OK)
}

fn load_season(dir: &Path) -> Result<SeasonalProfile> {
    #[derive(Deserialize)]
    struct SeasonFile {
        season: Vec<f64>,
    }
    let f: SeasonFile = serde_json::from_reader(File::open(dir.join("season.json"))?)?;
    SeasonalProfile::new(f.season)
}

fn load_manifest(dir: &Path) -> Result<Manifest> {
    Ok(serde_json::from_reader(File::open(dir.join("manifest.json"))?)?)
}

fn load_params(path: &Path) -> Result<MarkedParams> {
    let fit: FitReportJson = serde_json::from_reader(File::open(path)?)?;
    fit.params()
}

fn cmd_fit(run: &Run) -> Result<i32> {
    let data = run.config.data()?;
    let out = run.config.out()?;
    let train = BinnedSeries::load(data, "train")?;
    let season = load_season(data)?;
    let cfg = run.config.fit_config();
    let report = fit(&train, &season, &cfg)?;
    run.write_json(out, "fit", &report.to_json())?;
    println!(
        "{} λ_h={} objective {:.6} after {} iterations ({})",
        cfg.variant.name(),
        cfg.lambda_h,
        report.final_objective(),
        report.n_iters,
        if report.converged { "converged" } else { "not converged" }
    );
    Ok(if report.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

#[derive(Debug, Serialize)]
struct CvRow {
    lambda_h: f64,
    val_pll: f64,
    converged: bool,
    n_iters: usize,
    final_objective: f64,
}

fn cmd_cv(run: &Run) -> Result<i32> {
    let data = run.config.data()?;
    let out = run.config.out()?;
    let train = BinnedSeries::load(data, "train")?;
    let val = BinnedSeries::load(data, "val")?;
    let season = load_season(data)?;
    let grid = run.config.grid.clone().unwrap_or_else(|| vec![0.0, 0.1, 0.5, 2.0, 10.0]);
    let cv = cross_validate_lambda(&train, &val, &season, &grid, &run.config.fit_config())?;
    let rows: Vec<CvRow> = cv
        .points
        .iter()
        .map(|p| CvRow {
            lambda_h: p.lambda_h,
            val_pll: p.val_pll,
            converged: p.report.converged,
            n_iters: p.report.n_iters,
            final_objective: p.report.final_objective(),
        })
        .collect();
    run.write_csv(out, "cv", &rows, &[])?;
    run.write_json(out, "cv", &serde_json::json!({ "best_lambda": cv.best_lambda, "points": rows }))?;
    run.write_json(out, "fit", &cv.best().report.to_json())?;
    println!("best λ_h = {}", cv.best_lambda);
    Ok(if cv.best().report.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn cmd_simulate(run: &Run) -> Result<i32> {
    let c = &run.config;
    let out = c.out()?;
    let n_bins = c.n_bins.ok_or_else(|| missing("n_bins"))?;
    let mode: SimMode = c.mode.as_deref().unwrap_or("recursive").parse()?;
    let series = if let Some(path) = &c.unmarked_params {
        let repr: UnmarkedParamsRepr = serde_json::from_reader(File::open(path)?)?;
        u_simulate(&UnmarkedParams::try_from(&repr)?, n_bins, c.seed(), mode)?
    } else {
        let params = load_params(c.params.as_deref().ok_or_else(|| missing("params"))?)?;
        let p_alarm = c.p_alarm.unwrap_or(0.0);
        let rho = params.spectral_radius(p_alarm);
        if rho >= 1.0 {
            eprintln!("warning: spectral radius of K + p·alpha is {rho:.3}; the process may explode");
        }
        let cfg = SimConfig::new(params, n_bins, p_alarm, c.seed());
        match mode {
            SimMode::Naive => simulate_naive(&cfg)?,
            SimMode::Recursive => simulate_recursive(&cfg)?,
        }
    };
    series.save(out, "simulated", Some(run.provenance_value()))?;
    println!("simulated {} events over {} bins", series.total_count(), series.n_bins());
    Ok(EXIT_OK)
}

fn history_and_test(data: &Path) -> Result<(BinnedSeries, BinnedSeries)> {
    let train = BinnedSeries::load(data, "train")?;
    let val = BinnedSeries::load(data, "val")?;
    let test = BinnedSeries::load(data, "test")?;
    Ok((train.concat(&val)?, test))
}

fn labels(data: &Path, dims: usize) -> Vec<String> {
    load_manifest(data)
        .map(|m| m.wards)
        .unwrap_or_else(|_| (1..=dims).map(|i| i.to_string()).collect())
}

#[derive(Debug, Serialize)]
struct ForecastRow {
    ward: usize,
    label: String,
    mean: f64,
    lower: f64,
    upper: f64,
    observed: Option<u64>,
}

fn cmd_forecast(run: &Run) -> Result<i32> {
    let c = &run.config;
    let data = c.data()?;
    let out = c.out()?;
    let params = load_params(c.params.as_deref().ok_or_else(|| missing("params"))?)?;
    let (history, test) = history_and_test(data)?;
    let horizon = c.horizon_bins.unwrap_or(test.n_bins());
    let n_sims = c.n_sims.unwrap_or(100);
    let p_alarm = match c.p_alarm {
        Some(p) => p,
        None => estimate_alarm_prob(&history)?,
    };
    let fc = forecast(&params, &history, horizon, n_sims, p_alarm, c.seed())?;
    let names = labels(data, history.dims());
    let rows: Vec<ForecastRow> = fc
        .per_ward
        .iter()
        .map(|w| ForecastRow {
            ward: w.ward + 1,
            label: names[w.ward].clone(),
            mean: w.mean,
            lower: w.lower,
            upper: w.upper,
            observed: (horizon <= test.n_bins()).then(|| {
                test.events(w.ward)
                    .iter()
                    .filter(|e| e.bin <= horizon)
                    .map(|e| e.count as u64)
                    .sum()
            }),
        })
        .collect();
    run.write_csv(out, "forecast", &rows, &[])?;
    run.write_json(out, "forecast", &serde_json::json!({ "p_alarm": p_alarm, "forecast": fc }))?;
    let covered = rows
        .iter()
        .filter(|r| r.observed.is_some_and(|o| (o as f64) >= r.lower && (o as f64) <= r.upper))
        .count();
    println!("forecast over {horizon} bins; observed totals inside 95% interval for {covered} of {} wards", rows.len());
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct PllRow {
    ward: usize,
    label: String,
    pll: f64,
}

#[derive(Debug, Serialize)]
struct AttributionRow {
    bin: usize,
    ward: usize,
    count: u32,
    background: f64,
    nonalarm_self: f64,
    nonalarm_cross: f64,
    alarm_self: f64,
    alarm_cross: f64,
}

#[derive(Debug, Serialize)]
struct BucketRow {
    lower_hours: f64,
    upper_hours: Option<f64>,
    observed: f64,
    sim_mean: f64,
    band_lower: f64,
    band_upper: f64,
}

fn cmd_evaluate(run: &Run) -> Result<i32> {
    let c = &run.config;
    let data = c.data()?;
    let out = c.out()?;
    let params = load_params(c.params.as_deref().ok_or_else(|| missing("params"))?)?;
    let (history, test) = history_and_test(data)?;
    let names = labels(data, history.dims());

    let score = predictive_loglik(&params, &history, &test)?;
    let pll_rows: Vec<PllRow> = score
        .per_ward
        .iter()
        .enumerate()
        .map(|(m, v)| PllRow {
            ward: m + 1,
            label: names[m].clone(),
            pll: *v,
        })
        .collect();
    run.write_csv(out, "pll", &pll_rows, &["ward", "label", "pll"])?;
    run.write_json(out, "pll", &score)?;

    if test.total_count() > 0 {
        let trig = triggering_report(&params, &test)?;
        let rows: Vec<AttributionRow> = trig
            .per_event
            .iter()
            .map(|e| AttributionRow {
                bin: e.bin,
                ward: e.ward + 1,
                count: e.count,
                background: e.shares.background,
                nonalarm_self: e.shares.nonalarm_self,
                nonalarm_cross: e.shares.nonalarm_cross,
                alarm_self: e.shares.alarm_self,
                alarm_cross: e.shares.alarm_cross,
            })
            .collect();
        run.write_csv(out, "triggering", &rows, &[])?;
        let mut summary = serde_json::to_value(&trig)?;
        summary.as_object_mut().expect("object").remove("per_event");
        run.write_json(out, "triggering", &summary)?;
    }

    if test.timeline().len() >= 2 {
        let d = InterarrivalConfig::default();
        let cfg = InterarrivalConfig {
            n_sims: c.n_sims.unwrap_or(d.n_sims),
            bin_hours: c.bin_hours.unwrap_or(d.bin_hours),
            n_buckets: c.n_buckets.unwrap_or(d.n_buckets),
            horizon_bins: c.horizon_bins,
            seed: c.seed(),
        };
        let ia = interarrival_check(&params, &history, &test, &cfg)?;
        let rows: Vec<BucketRow> = ia
            .buckets
            .iter()
            .map(|b| {
                let (lo, hi) = b.band();
                BucketRow {
                    lower_hours: b.lower_hours,
                    upper_hours: b.upper_hours,
                    observed: b.observed,
                    sim_mean: b.sim_mean,
                    band_lower: lo,
                    band_upper: hi,
                }
            })
            .collect();
        run.write_csv(out, "interarrival", &rows, &[])?;
        run.write_json(out, "interarrival", &ia)?;
        println!("interarrival: observed inside ±2σ in {} of {} buckets", ia.buckets_in_band(), ia.buckets.len());
    }
    println!("predictive log-likelihood {:.4} over {} test bins", score.overall, score.n_test_bins);
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct ReportRow {
    model: String,
    variant: String,
    lambda_h: f64,
    pll: f64,
    background: f64,
    nonalarm: f64,
    alarm: f64,
}

fn cmd_report(run: &Run) -> Result<i32> {
    let c = &run.config;
    let data = c.data()?;
    let out = c.out()?;
    let fits = c.fits.as_ref().filter(|f| !f.is_empty()).ok_or_else(|| missing("fits"))?;
    let (history, test) = history_and_test(data)?;
    let full = history.concat(&test)?;
    let mut rows = Vec::new();
    for path in fits {
        let fit: FitReportJson = serde_json::from_reader(File::open(path)?)?;
        let params = fit.params()?;
        let pll = predictive_loglik(&params, &history, &test)?.overall;
        let trig = triggering_report(&params, &full)?;
        rows.push(ReportRow {
            model: path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
            variant: fit.variant.name().to_string(),
            lambda_h: fit.lambda_h,
            pll,
            background: trig.avg_background,
            nonalarm: trig.avg_nonalarm,
            alarm: trig.avg_alarm,
        });
    }
    run.write_csv(out, "report", &rows, &[])?;
    run.write_json(out, "report", &serde_json::json!({ "models": rows }))?;
    for r in &rows {
        println!(
            "{:<12} {:<5} pLL {:>12.3}  background {:>6.2}%  non-alarm {:>6.2}%  alarm {:>6.2}%",
            r.model,
            r.variant,
            r.pll,
            100.0 * r.background,
            100.0 * r.nonalarm,
            100.0 * r.alarm
        );
    }
    Ok(EXIT_OK)
}

/// Timings (seconds) for one event density.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchPoint {
    pub n_events: u64,
    pub recursive: f64,
    pub event_form: f64,
    pub naive: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchResult {
    pub n_bins: usize,
    pub sparse: BenchPoint,
    pub dense: BenchPoint,
    pub recursive_ratio: f64,
    pub event_form_ratio: f64,
    pub naive_ratio: f64,
}

fn time_best<F: FnMut() -> Result<f64>>(reps: usize, mut f: F) -> Result<f64> {
    let mut best = f64::INFINITY;
    for _ in 0..reps {
        let t = Instant::now();
        std::hint::black_box(f()?);
        best = best.min(t.elapsed().as_secs_f64());
    }
    Ok(best)
}

/// Evenly spread single-count events in two wards, about `n_events` in total.
fn bench_series(n_bins: usize, n_events: usize) -> Result<BinnedSeries> {
    let per_ward = (n_events / 2).max(1);
    let stride = n_bins as f64 / per_ward as f64;
    let events = (0..2)
        .map(|m| {
            let mut bins: Vec<usize> = (0..per_ward)
                .map(|i| 1 + (((i as f64 + 0.5 * m as f64) * stride) as usize).min(n_bins - 1))
                .collect();
            bins.dedup();
            bins.into_iter()
                .enumerate()
                .map(|(i, b)| Event::new(b, 1, i % 7 == 0))
                .collect()
        })
        .collect();
    BinnedSeries::new(2, n_bins, 5, 0, events)
}

/// Measures the three evaluators at a fixed number of bins with the event
/// count scaled tenfold.
pub fn benchmark(n_bins: usize, base_events: usize) -> Result<BenchResult> {
    let params = MarkedParams::new(
        vec![0.05, 0.05],
        nalgebra::DMatrix::from_row_slice(2, 2, &[0.3, 0.1, 0.1, 0.3]),
        nalgebra::DMatrix::from_element(2, 2, 0.05),
        0.1,
        SeasonalProfile::flat(),
    )?;
    let point = |n_events: usize| -> Result<BenchPoint> {
        let s = bench_series(n_bins, n_events)?;
        Ok(BenchPoint {
            n_events: s.total_count(),
            recursive: time_best(5, || Ok(loglik_recursive(&params, &s)?.value))?,
            event_form: time_best(1, || Ok(loglik_event_form(&params, &s)?.value))?,
            naive: time_best(1, || Ok(loglik_naive(&params, &s)?.value))?,
        })
    };
    let sparse = point(base_events)?;
    let dense = point(10 * base_events)?;
    Ok(BenchResult {
        n_bins,
        recursive_ratio: dense.recursive / sparse.recursive,
        event_form_ratio: dense.event_form / sparse.event_form,
        naive_ratio: dense.naive / sparse.naive,
        sparse,
        dense,
    })
}

fn cmd_bench(run: &Run) -> Result<i32> {
    let n_bins = run.config.n_bins.unwrap_or(50_000);
    let base = (n_bins / 100).max(2);
    let r = benchmark(n_bins, base)?;
    println!("{:>10} {:>12} {:>12} {:>12}", "events", "recursive", "event form", "naive grid");
    for p in [&r.sparse, &r.dense] {
        println!("{:>10} {:>11.5}s {:>11.5}s {:>11.5}s", p.n_events, p.recursive, p.event_form, p.naive);
    }
    println!(
        "growth for 10× events: recursive {:.1}×, event form {:.1}×, naive grid {:.1}×",
        r.recursive_ratio, r.event_form_ratio, r.naive_ratio
    );
    if let Some(out) = &run.config.out {
        run.write_json(out, "bench", &r)?;
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlay_prefers_flags() {
        let mut file: RunConfig = toml::from_str("seed = 3\nlambda_h = 0.5\nvariant = \"MHP\"").unwrap();
        let flags = RunConfig {
            seed: Some(9),
            ..RunConfig::default()
        };
        file.overlay(&flags);
        assert_eq!(file.seed, Some(9));
        assert_eq!(file.lambda_h, Some(0.5));
        assert_eq!(file.variant, Some(Variant::Mhp));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("sed = 3").is_err());
    }

    #[test]
    fn hash_ignores_output_directory() {
        let a = RunConfig {
            seed: Some(1),
            out: Some("a".into()),
            ..RunConfig::default()
        };
        let b = RunConfig {
            out: Some("b".into()),
            ..a.clone()
        };
        assert_eq!(a.hash("fit"), b.hash("fit"));
        assert_ne!(a.hash("fit"), a.hash("cv"));
    }

    #[test]
    fn splits_are_hour_aligned() {
        let (a, b) = split_points(24 * 12 * 10, 5, [0.75, 0.10, 0.15]).unwrap();
        assert_eq!(a % 12, 0);
        assert_eq!(b % 12, 0);
        assert!(split_points(10, 5, [0.75, 0.10, 0.15]).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&HawkesError::Schema { row: 2, message: String::new() }), EXIT_INPUT);
        assert_eq!(exit_code(&HawkesError::Optimizer(String::new())), EXIT_NOT_CONVERGED);
        assert_eq!(exit_code(&HawkesError::Explosive { bin: 1, intensity: 1e10 }), EXIT_NUMERICAL);
    }
}
