//! Batch command-line front end.
//!
//! Every subcommand reads plain files and writes plain files; nothing else
//! influences the output. Options can also come from a `--config` file of
//! `key = value` lines whose keys are the long option names; options given
//! on the command line win over the file.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate};
use clap::{ArgAction, Args, CommandFactory, Parser, Subcommand};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eval::{self, PipelineConfig, ScoreAgainst};
use crate::features::{apply_scaler, build_matrix_with, fit_scaler, ScaleMode, WeekStart};
use crate::lstm::{make_windows, ForecastMode, LstmTrainParams, WindowSpec};
use crate::mlp::{Activation, MlpParams};
use crate::model::{FittedModel, Forecaster, LstmSpec, ModelKind, ModelSpec};
use crate::plot;
use crate::preprocess::{FilterConfig, FilterKind};
use crate::series::{self, DailySeries, SplitSpec, TrafficRecord, VehicleClass};
use crate::synth::{self, Event, MissingSpan, SynthConfig};
use crate::tree::{BoostLoss, BoostParams, ForestParams, MaxFeatures, TreeParams};

#[derive(Debug, Parser)]
#[command(
    name = "traffic-forecast",
    version,
    about = "Daily highway traffic forecasting: filtering, calendar features, tree ensembles, MLP, LSTM and SMAPE comparison"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic station CSV and its noise-free twin
    Synth(SynthArgs),
    /// Impute and filter one series, writing DATE,VALUE
    Clean(CleanArgs),
    /// Write the calendar feature matrix (or LSTM windows) as CSV
    Featurize(FeaturizeArgs),
    /// Fit one model and write it as JSON
    Train(TrainArgs),
    /// Load a model and write DATE,FORECAST
    Predict(PredictArgs),
    /// Fit one model on the training window and score it on the test window
    Evaluate(EvaluateArgs),
    /// Evaluate several models and write the SMAPE summary table
    Compare(CompareArgs),
    /// Draw measured against forecast values as an SVG chart
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// File of `key = value` lines supplying option defaults
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SeedArg {
    /// Master seed; every random component derives its own seed from it
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Ingestion CSV (STATION_CODE,DATE,TC1,TC2,TC3)
    #[arg(long, value_name = "FILE")]
    input: PathBuf,
    /// Station code; may be omitted when the file holds one station
    #[arg(long)]
    station: Option<u32>,
    /// Vehicle class
    #[arg(long, default_value = "TC1")]
    class: VehicleClass,
}

#[derive(Debug, Args)]
struct FilterArgs {
    /// none, median, moving_average, exponential or deseasonalize
    #[arg(long, default_value = "median")]
    filter: FilterKind,
    /// Odd window length for median and moving-average filters
    #[arg(long, default_value_t = 5)]
    window: usize,
    /// Smoothing factor of the exponential filter
    #[arg(long, default_value_t = 0.3)]
    alpha: f64,
    /// Season length for deseasonalisation
    #[arg(long, default_value_t = 7)]
    period: usize,
}

impl FilterArgs {
    fn config(&self) -> FilterConfig {
        FilterConfig {
            kind: self.filter,
            window: self.window,
            alpha: self.alpha,
            period: self.period,
        }
    }
}

/// Hyperparameters of every learner. Defaults follow the published
/// configurations where one exists.
#[derive(Debug, Args)]
struct ModelArgs {
    /// Random forest: number of trees
    #[arg(long, default_value_t = 5000)]
    rf_trees: usize,
    /// Random forest: features per split (all, sqrt or a fraction)
    #[arg(long, default_value = "sqrt")]
    rf_max_features: MaxFeatures,
    #[arg(long, default_value_t = 2)]
    rf_min_samples_split: usize,
    #[arg(long, default_value_t = 1)]
    rf_min_samples_leaf: usize,
    #[arg(long)]
    rf_max_depth: Option<usize>,
    /// Random forest: draw a bootstrap sample per tree
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    rf_bootstrap: bool,

    /// Extra-trees: number of trees
    #[arg(long, default_value_t = 100)]
    et_trees: usize,
    #[arg(long, default_value = "0.75")]
    et_max_features: MaxFeatures,
    #[arg(long, default_value_t = 10)]
    et_min_samples_split: usize,
    #[arg(long, default_value_t = 13)]
    et_min_samples_leaf: usize,
    #[arg(long)]
    et_max_depth: Option<usize>,

    /// AdaBoost.R2: maximum number of boosting rounds
    #[arg(long, default_value_t = 10_000)]
    ada_rounds: usize,
    #[arg(long, default_value_t = 1.0)]
    ada_learning_rate: f64,
    /// AdaBoost.R2: depth of each base tree
    #[arg(long, default_value_t = 3)]
    ada_max_depth: usize,
    /// linear, square or exponential
    #[arg(long, default_value = "linear")]
    ada_loss: BoostLoss,

    /// MLP: comma-separated hidden layer widths
    #[arg(long, value_delimiter = ',', default_value = "200,100,100,200,100,200")]
    mlp_hidden: Vec<usize>,
    /// MLP: L2 penalty
    #[arg(long, default_value_t = 0.01)]
    mlp_alpha: f64,
    /// MLP: epoch cap
    #[arg(long, default_value_t = 80_000)]
    mlp_max_iter: usize,
    #[arg(long, default_value_t = 40)]
    mlp_batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    mlp_learning_rate: f64,
    /// relu, tanh or logistic
    #[arg(long, default_value = "relu")]
    mlp_activation: Activation,
    #[arg(long, default_value_t = 1e-6)]
    mlp_tol: f64,

    /// LSTM: comma-separated layer sizes
    #[arg(long, value_delimiter = ',', default_value = "16")]
    lstm_hidden: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    lstm_lookback: usize,
    #[arg(long, default_value_t = 10)]
    lstm_lookforward: usize,
    #[arg(long, default_value_t = 1000)]
    lstm_epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    lstm_learning_rate: f64,
    #[arg(long, default_value_t = 16)]
    lstm_batch_size: usize,
    #[arg(long, default_value_t = 1e-7)]
    lstm_tol: f64,

    /// Naive seasonal baseline: season length in days
    #[arg(long, default_value_t = 7)]
    naive_period: usize,
}

/// Derives an independent seed for one component from the master seed.
pub fn component_seed(master: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng.next_u64()
}

fn kind_stream(kind: ModelKind) -> u64 {
    match kind {
        ModelKind::RandomForest => 1,
        ModelKind::ExtraTrees => 2,
        ModelKind::AdaBoost => 3,
        ModelKind::Mlp => 4,
        ModelKind::Lstm => 5,
        ModelKind::NaiveSeasonal => 6,
    }
}

impl ModelArgs {
    fn spec(&self, kind: ModelKind, master_seed: u64) -> Result<ModelSpec, String> {
        let seed = component_seed(master_seed, kind_stream(kind));
        Ok(match kind {
            ModelKind::RandomForest => ModelSpec::RandomForest(ForestParams {
                bootstrap: self.rf_bootstrap,
                ..ForestParams::random_forest(
                    self.rf_trees,
                    TreeParams {
                        max_features: self.rf_max_features,
                        min_samples_split: self.rf_min_samples_split,
                        min_samples_leaf: self.rf_min_samples_leaf,
                        max_depth: self.rf_max_depth,
                        seed,
                    },
                )
            }),
            ModelKind::ExtraTrees => ModelSpec::ExtraTrees(ForestParams::extra_trees(
                self.et_trees,
                TreeParams {
                    max_features: self.et_max_features,
                    min_samples_split: self.et_min_samples_split,
                    min_samples_leaf: self.et_min_samples_leaf,
                    max_depth: self.et_max_depth,
                    seed,
                },
            )),
            ModelKind::AdaBoost => ModelSpec::AdaBoost(BoostParams {
                n_estimators: self.ada_rounds,
                learning_rate: self.ada_learning_rate,
                base: TreeParams {
                    max_depth: Some(self.ada_max_depth),
                    seed,
                    ..TreeParams::default()
                },
                loss: self.ada_loss,
            }),
            ModelKind::Mlp => ModelSpec::Mlp(MlpParams {
                hidden_layer_sizes: self.mlp_hidden.clone(),
                alpha: self.mlp_alpha,
                max_iter: self.mlp_max_iter,
                batch_size: self.mlp_batch_size,
                learning_rate: self.mlp_learning_rate,
                seed,
                activation: self.mlp_activation,
                tol: self.mlp_tol,
            }),
            ModelKind::Lstm => ModelSpec::Lstm(LstmSpec {
                hidden: self.lstm_hidden.clone(),
                window: WindowSpec::new(self.lstm_lookback, self.lstm_lookforward).map_err(|e| e.to_string())?,
                train: LstmTrainParams {
                    epochs: self.lstm_epochs,
                    learning_rate: self.lstm_learning_rate,
                    batch_size: self.lstm_batch_size,
                    seed,
                    tol: self.lstm_tol,
                },
            }),
            ModelKind::NaiveSeasonal => ModelSpec::NaiveSeasonal {
                period: self.naive_period,
            },
        })
    }
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[command(flatten)]
    seed: SeedArg,
    /// Output files are PREFIX.csv and PREFIX_clean.csv
    #[arg(long, default_value = "synth")]
    output_prefix: String,
    #[arg(long, default_value_t = 101)]
    station: u32,
    #[arg(long, default_value = "2013-06-01")]
    start: NaiveDate,
    #[arg(long, default_value_t = 1461)]
    days: usize,
    /// Mean daily TC1 count; TC2 and TC3 are scaled from it
    #[arg(long, default_value_t = 12_000.0)]
    base_level: f64,
    /// Seven Monday-first weekday multipliers
    #[arg(long, value_delimiter = ',', default_value = "0.92,0.9,0.9,0.95,1.12,1.18,1.03")]
    weekly: Vec<f64>,
    #[arg(long, default_value_t = 0.25)]
    annual_amplitude: f64,
    #[arg(long, default_value_t = 215.0)]
    peak_doy: f64,
    /// Relative growth per year
    #[arg(long, default_value_t = 0.04)]
    trend: f64,
    /// Events as DATE:DAYS:MULTIPLIER with DATE either YYYY-MM-DD or MM-DD (yearly)
    #[arg(long, value_delimiter = ',', default_value = "12-31:1:0.15,01-01:1:0.6,07-28:5:1.35,08-29:4:1.3,04-12:3:1.2")]
    events: Vec<String>,
    /// Probability that a day is a ±10x outlier
    #[arg(long, default_value_t = 0.01)]
    outlier_rate: f64,
    /// Missing spans as YYYY-MM-DD:DAYS; pass an empty string for none
    #[arg(long, value_delimiter = ',', default_value = "2014-02-10:9,2015-10-03:4")]
    missing: Vec<String>,
    /// Relative Gaussian noise
    #[arg(long, default_value_t = 0.04)]
    noise_sigma: f64,
}

/// Relative volume of the three vehicle classes.
pub const CLASS_SHARES: [f64; 3] = [1.0, 0.22, 0.08];

impl SynthArgs {
    fn base_config(&self) -> Result<SynthConfig, String> {
        let weekly: [f64; 7] = self
            .weekly
            .clone()
            .try_into()
            .map_err(|w: Vec<f64>| format!("--weekly needs 7 values, got {}", w.len()))?;
        let events = self
            .events
            .iter()
            .filter(|s| !s.trim().is_empty())
            .map(|s| Event::parse(s))
            .collect::<crate::Result<Vec<_>>>()
            .map_err(|e| e.to_string())?;
        let missing_spans = self
            .missing
            .iter()
            .filter(|s| !s.trim().is_empty())
            .map(|s| MissingSpan::parse(s))
            .collect::<crate::Result<Vec<_>>>()
            .map_err(|e| e.to_string())?;
        Ok(SynthConfig {
            station_code: self.station,
            class: VehicleClass::TC1,
            start_date: self.start,
            n_days: self.days,
            base_level: self.base_level,
            weekly_amplitudes: weekly,
            annual_amplitude: self.annual_amplitude,
            peak_doy: self.peak_doy,
            trend: self.trend,
            events,
            outlier_rate: self.outlier_rate,
            missing_spans,
            noise_sigma: self.noise_sigma,
            seed: self.seed.seed,
        })
    }
}

#[derive(Debug, Args)]
struct CleanArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    filter: FilterArgs,
    #[arg(long, default_value = "clean.csv")]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct FeaturizeArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    filter: FilterArgs,
    /// Which weekday is numbered 0 (monday or sunday)
    #[arg(long, default_value = "monday")]
    week_start: WeekStart,
    /// none, minmax01 or standardize
    #[arg(long, default_value = "none")]
    scale: String,
    /// Write LSTM windows with this lookback instead of the feature matrix
    #[arg(long, requires = "lookforward")]
    lookback: Option<usize>,
    #[arg(long, requires = "lookback")]
    lookforward: Option<usize>,
    #[arg(long, default_value = "features.csv")]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[command(flatten)]
    seed: SeedArg,
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    filter: FilterArgs,
    /// rf, extratrees, adaboost, mlp, lstm or naive
    #[arg(long)]
    model: ModelKind,
    /// Train only on days up to and including this date
    #[arg(long)]
    cutoff: Option<NaiveDate>,
    #[arg(long, default_value = "monday")]
    week_start: WeekStart,
    #[command(flatten)]
    params: ModelArgs,
    #[arg(long, default_value = "model.json")]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Model written by `train`
    #[arg(long = "model", value_name = "FILE")]
    model_file: PathBuf,
    /// First forecast date (default: the day after training ends)
    #[arg(long)]
    from: Option<NaiveDate>,
    /// Number of consecutive days to forecast
    #[arg(long, default_value_t = 365)]
    days: usize,
    #[arg(long, default_value = "forecast.csv")]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    filter: FilterArgs,
    /// Last training day; the test window is everything after it
    #[arg(long, default_value = "2016-05-31")]
    cutoff: NaiveDate,
    /// Score against raw or filtered test actuals
    #[arg(long, default_value = "raw")]
    score_against: ScoreAgainst,
    /// LSTM forecasting over the test window: multi_step or one_step
    #[arg(long, default_value = "multi_step")]
    lstm_mode: ForecastMode,
    #[arg(long, default_value = "monday")]
    week_start: WeekStart,
    #[command(flatten)]
    params: ModelArgs,
}

impl PipelineArgs {
    fn split(&self) -> Result<(DailySeries, DailySeries), String> {
        let series = load_series(&self.input)?;
        series::split_train_test(&series, SplitSpec::new(self.cutoff)).map_err(|e| e.to_string())
    }

    fn config(&self) -> PipelineConfig {
        PipelineConfig {
            filter: self.filter.config(),
            score_against: self.score_against,
            lstm_mode: self.lstm_mode,
            week_start: self.week_start,
        }
    }
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[command(flatten)]
    seed: SeedArg,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long)]
    model: ModelKind,
    /// Writes PREFIX_report.csv and PREFIX_days.csv
    #[arg(long, default_value = "eval")]
    output_prefix: String,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[command(flatten)]
    seed: SeedArg,
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Comma-separated models to compare
    #[arg(long, value_delimiter = ',', default_value = "mlp,rf,adaboost,extratrees,lstm")]
    models: Vec<ModelKind>,
    /// Summary CSV
    #[arg(long, default_value = "compare.csv")]
    output: PathBuf,
    /// Also write PREFIX_<model>_days.csv for every model
    #[arg(long)]
    days_prefix: Option<String>,
}

#[derive(Debug, Args)]
struct PlotArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// DATE,ACTUAL,FORECAST file from `evaluate` or `compare`
    #[arg(long, value_name = "FILE")]
    input: PathBuf,
    #[arg(long, default_value = "Measured vs forecast")]
    title: String,
    #[arg(long, default_value = "plot.svg")]
    output: PathBuf,
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<String> = argv
        .into_iter()
        .map(|a| a.into().to_string_lossy().into_owned())
        .collect();
    let argv = match merge_config(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = std::io::Write::write_all(&mut std::io::stdout(), e.render().to_string().as_bytes());
                    0
                }
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    eprint!("{e}");
                    2
                }
                _ => {
                    let text = e.render().to_string();
                    let first = text.lines().next().unwrap_or("invalid arguments");
                    eprintln!("{first} (see --help)");
                    2
                }
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.replace('\n', " "));
            1
        }
    }
}

/// Splices `key = value` pairs from a `--config` file into the argument
/// list, skipping keys already given on the command line.
fn merge_config(argv: Vec<String>) -> Result<Vec<String>, String> {
    let Some(pos) = argv.iter().position(|a| a == "--config" || a.starts_with("--config=")) else {
        return Ok(argv);
    };
    let path = match argv[pos].strip_prefix("--config=") {
        Some(p) => p.to_string(),
        None => argv.get(pos + 1).cloned().ok_or("--config needs a file path")?,
    };
    let Some(sub) = argv.get(1).cloned() else {
        return Ok(argv);
    };
    let command = Cli::command();
    let Some(subcommand) = command.find_subcommand(&sub) else {
        return Ok(argv);
    };
    let known: BTreeSet<String> = subcommand
        .get_arguments()
        .filter_map(|a| a.get_long().map(str::to_string))
        .collect();
    let given: BTreeSet<String> = argv
        .iter()
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a).to_string())
        .collect();
    let text = fs::read_to_string(&path).map_err(|e| format!("{path}: {e}"))?;
    let mut extra = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("{path} line {}: expected `key = value`", i + 1))?;
        let key = key.trim().replace('_', "-");
        if key == "config" || !known.contains(&key) {
            return Err(format!("{path} line {}: unknown option `{key}` for `{sub}`", i + 1));
        }
        if !given.contains(&key) {
            extra.push(format!("--{key}"));
            extra.push(value.trim().to_string());
        }
    }
    let mut out = argv[..2].to_vec();
    out.extend(extra);
    out.extend(argv[2..].iter().cloned());
    Ok(out)
}

fn dispatch(command: Command) -> Result<(), String> {
    match command {
        Command::Synth(a) => synth_cmd(a),
        Command::Clean(a) => clean_cmd(a),
        Command::Featurize(a) => featurize_cmd(a),
        Command::Train(a) => train_cmd(a),
        Command::Predict(a) => predict_cmd(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Compare(a) => compare_cmd(a),
        Command::Plot(a) => plot_cmd(a),
    }
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<(), String> {
    fs::write(path, contents).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_series(input: &InputArgs) -> Result<DailySeries, String> {
    let file = fs::File::open(&input.input).map_err(|e| format!("{}: {e}", input.input.display()))?;
    let records = series::parse_csv(file).map_err(|e| format!("{}: {e}", input.input.display()))?;
    let station = match input.station {
        Some(s) => s,
        None => {
            let stations: BTreeSet<u32> = records.iter().map(|r| r.station_code).collect();
            match stations.len() {
                1 => *stations.iter().next().expect("one station"),
                0 => return Err(format!("{}: no records", input.input.display())),
                _ => {
                    let list: Vec<String> = stations.iter().map(u32::to_string).collect();
                    return Err(format!(
                        "{} holds stations {}; choose one with --station",
                        input.input.display(),
                        list.join(", ")
                    ));
                }
            }
        }
    };
    series::to_series(&records, station, input.class).map_err(|e| format!("{}: {e}", input.input.display()))
}

fn synth_cmd(a: SynthArgs) -> Result<(), String> {
    let base = a.base_config()?;
    let mut noisy = Vec::new();
    let mut clean = Vec::new();
    let mut clipped = 0;
    for (k, class) in VehicleClass::ALL.into_iter().enumerate() {
        let config = SynthConfig {
            class,
            base_level: base.base_level * CLASS_SHARES[k],
            seed: component_seed(base.seed, 11 + k as u64),
            ..base.clone()
        };
        let out = synth::generate(&config).map_err(|e| e.to_string())?;
        clipped += out.clipped;
        noisy.push(out.noisy);
        clean.push(out.clean);
    }
    let rows = |series: &[DailySeries]| -> Vec<TrafficRecord> {
        (0..base.n_days)
            .filter_map(|t| {
                let v: Vec<f64> = series.iter().map(|s| s.values()[t]).collect::<Option<Vec<_>>>()?;
                Some(TrafficRecord {
                    station_code: base.station_code,
                    date: series[0].date_at(t),
                    tc1: v[0].round() as u64,
                    tc2: v[1].round() as u64,
                    tc3: v[2].round() as u64,
                })
            })
            .collect()
    };
    let noisy_rows = rows(&noisy);
    let noisy_path = PathBuf::from(format!("{}.csv", a.output_prefix));
    let clean_path = PathBuf::from(format!("{}_clean.csv", a.output_prefix));
    write(&noisy_path, &series::write_csv(&noisy_rows))?;
    write(&clean_path, &series::write_csv(&rows(&clean)))?;
    println!(
        "wrote {} ({} of {} days, {} negative draws clipped) and {}",
        noisy_path.display(),
        noisy_rows.len(),
        base.n_days,
        clipped,
        clean_path.display()
    );
    Ok(())
}

fn values_csv(series: &DailySeries) -> String {
    let mut out = String::from("DATE,VALUE\n");
    for (t, v) in series.values().iter().enumerate() {
        let _ = writeln!(out, "{},{}", series.date_at(t), v.map(|v| v.to_string()).unwrap_or_default());
    }
    out
}

fn clean_cmd(a: CleanArgs) -> Result<(), String> {
    let series = load_series(&a.input)?;
    let filtered = a.filter.config().apply(&series).map_err(|e| e.to_string())?;
    write(&a.output, &values_csv(&filtered))
}

fn featurize_cmd(a: FeaturizeArgs) -> Result<(), String> {
    let series = load_series(&a.input)?;
    let filtered = a.filter.config().apply(&series).map_err(|e| e.to_string())?;
    let text = if let (Some(lookback), Some(lookforward)) = (a.lookback, a.lookforward) {
        let spec = WindowSpec::new(lookback, lookforward).map_err(|e| e.to_string())?;
        make_windows(&filtered, spec).map_err(|e| e.to_string())?.to_csv()
    } else {
        let matrix = build_matrix_with(&filtered, a.week_start).map_err(|e| e.to_string())?;
        let matrix = match a.scale.trim() {
            "none" => matrix,
            other => {
                let mode: ScaleMode = other.parse().map_err(|e: crate::Error| e.to_string())?;
                let params = fit_scaler(&matrix, mode).map_err(|e| e.to_string())?;
                apply_scaler(&matrix, &params).map_err(|e| e.to_string())?
            }
        };
        matrix.to_csv()
    };
    write(&a.output, &text)
}

fn train_cmd(a: TrainArgs) -> Result<(), String> {
    let mut series = load_series(&a.input)?;
    if let Some(cutoff) = a.cutoff {
        if cutoff < series.end_date() {
            series = series::split_train_test(&series, SplitSpec::new(cutoff))
                .map_err(|e| e.to_string())?
                .0;
        }
    }
    let prepared = a.filter.config().apply(&series).map_err(|e| e.to_string())?;
    let spec = a.params.spec(a.model, a.seed.seed)?;
    let fitted = spec.fit(&prepared, a.week_start).map_err(|e| e.to_string())?;
    write(&a.output, &fitted.to_json().map_err(|e| e.to_string())?)?;
    println!(
        "trained {} on {}..{} -> {}",
        fitted.name,
        fitted.train_start,
        fitted.train_end,
        a.output.display()
    );
    Ok(())
}

fn predict_cmd(a: PredictArgs) -> Result<(), String> {
    let text = read(&a.model_file)?;
    let model = FittedModel::from_json(&text).map_err(|e| format!("{}: {e}", a.model_file.display()))?;
    if a.days == 0 {
        return Err("--days must be at least 1".into());
    }
    let first = a.from.unwrap_or(model.train_end + Duration::days(1));
    let dates: Vec<NaiveDate> = (0..a.days as i64).map(|k| first + Duration::days(k)).collect();
    let forecasts = model.forecast(&dates).map_err(|e| e.to_string())?;
    let mut out = String::from("DATE,FORECAST\n");
    for (d, f) in dates.iter().zip(&forecasts) {
        let _ = writeln!(out, "{d},{f}");
    }
    write(&a.output, &out)
}

fn evaluate_cmd(a: EvaluateArgs) -> Result<(), String> {
    let (train, test) = a.pipeline.split()?;
    let spec = a.pipeline.params.spec(a.model, a.seed.seed)?;
    let report = eval::evaluate(&spec, &train, &test, &a.pipeline.config()).map_err(|e| e.to_string())?;
    write(Path::new(&format!("{}_report.csv", a.output_prefix)), &report.to_csv())?;
    write(Path::new(&format!("{}_days.csv", a.output_prefix)), &report.days_csv())?;
    println!(
        "{}: SMAPE {:.1}% over {} scored days ({}..{})",
        report.model,
        report.smape,
        report.scored_days(),
        report.test_start,
        report.test_end
    );
    Ok(())
}

fn compare_cmd(a: CompareArgs) -> Result<(), String> {
    if a.models.is_empty() {
        return Err("--models needs at least one model".into());
    }
    let (train, test) = a.pipeline.split()?;
    let specs = a
        .models
        .iter()
        .map(|&k| a.pipeline.params.spec(k, a.seed.seed))
        .collect::<Result<Vec<_>, _>>()?;
    let table = eval::compare(&specs, &train, &test, &a.pipeline.config()).map_err(|e| e.to_string())?;
    write(&a.output, &table.to_csv())?;
    if let Some(prefix) = &a.days_prefix {
        for r in &table.reports {
            write(Path::new(&format!("{prefix}_{}_days.csv", r.model)), &r.days_csv())?;
        }
    }
    print!("{}", table.to_text());
    Ok(())
}

fn plot_cmd(a: PlotArgs) -> Result<(), String> {
    let text = read(&a.input)?;
    let points = plot::parse_days_csv(&text).map_err(|e| format!("{}: {e}", a.input.display()))?;
    let svg = plot::render_svg(&points, &a.title).map_err(|e| e.to_string())?;
    write(&a.output, &svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clap_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn synth_defaults_are_the_benchmark() {
        let cli = Cli::try_parse_from(["tf", "synth"]).unwrap();
        let Command::Synth(a) = cli.command else { panic!() };
        assert_eq!(a.base_config().unwrap(), synth::benchmark_config());
    }

    #[test]
    fn model_defaults_follow_published_settings() {
        let cli = Cli::try_parse_from(["tf", "train", "--input", "x.csv", "--model", "rf"]).unwrap();
        let Command::Train(a) = cli.command else { panic!() };
        let ModelSpec::RandomForest(rf) = a.params.spec(ModelKind::RandomForest, 0).unwrap() else { panic!() };
        assert_eq!(rf.n_estimators, 5000);
        assert_eq!(rf.tree.max_features, MaxFeatures::Sqrt);
        assert!(rf.bootstrap);
        let ModelSpec::ExtraTrees(et) = a.params.spec(ModelKind::ExtraTrees, 0).unwrap() else { panic!() };
        assert_eq!((et.n_estimators, et.tree.min_samples_split, et.tree.min_samples_leaf), (100, 10, 13));
        assert_eq!(et.tree.max_features, MaxFeatures::Fraction(0.75));
        let ModelSpec::Mlp(m) = a.params.spec(ModelKind::Mlp, 0).unwrap() else { panic!() };
        assert_eq!(m.hidden_layer_sizes, vec![200, 100, 100, 200, 100, 200]);
        assert_eq!((m.alpha, m.max_iter, m.batch_size), (0.01, 80_000, 40));
        let ModelSpec::AdaBoost(b) = a.params.spec(ModelKind::AdaBoost, 0).unwrap() else { panic!() };
        assert_eq!((b.n_estimators, b.learning_rate), (10_000, 1.0));
        let ModelSpec::Lstm(l) = a.params.spec(ModelKind::Lstm, 0).unwrap() else { panic!() };
        assert_eq!((l.window.lookback, l.window.lookforward, l.train.epochs), (100, 10, 1000));
    }

    #[test]
    fn component_seeds_differ() {
        assert_ne!(component_seed(42, 1), component_seed(42, 2));
        assert_eq!(component_seed(42, 1), component_seed(42, 1));
        assert_ne!(component_seed(42, 1), component_seed(43, 1));
    }

    #[test]
    fn config_merge_respects_command_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        fs::write(&path, "# comment\nwindow = 7\nfilter = moving_average\n").unwrap();
        let argv: Vec<String> = ["tf", "clean", "--config", path.to_str().unwrap(), "--window", "3"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let merged = merge_config(argv).unwrap();
        assert!(merged.contains(&"moving_average".to_string()));
        assert!(!merged.contains(&"7".to_string()));

        fs::write(&path, "bogus = 1\n").unwrap();
        let argv: Vec<String> = ["tf", "clean", "--config", path.to_str().unwrap()]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert!(merge_config(argv).unwrap_err().contains("line 1"));
    }
}
