//! One fit/forecast contract over every learner.
//!
//! A [`ModelSpec`] names a learner and its hyperparameters. Fitting it on a
//! complete training series yields a [`FittedModel`]: the learned state plus
//! the training window it came from. Every fitted model answers
//! [`Forecaster::forecast`] for a list of dates.
//!
//! Calendar-feature learners (forests, boosting, MLP) can score any date.
//! Sequence learners (LSTM, naive seasonal) only see the training history,
//! so they forecast dates after the training window.
//!
//! Fitted models serialize to JSON inside a versioned envelope. Every float
//! is stored as its IEEE-754 bit pattern, so a reloaded model predicts
//! bit-for-bit what the original did.

use std::fmt;
use std::str::FromStr;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{calendar_rows, fit_scaler_rows, ScaleMode, ScalerParams, WeekStart};
use crate::lstm::{self, make_windows, roll_forward, LstmNetwork, LstmTrainParams, Normalizer, WindowSpec};
use crate::mlp::{self, MlpModel, MlpParams};
use crate::series::{DailySeries, VehicleClass};
use crate::tree::{fit_adaboost_r2, fit_forest, AdaBoost, BoostParams, Forest, ForestParams};

pub const FORMAT_NAME: &str = "traffic-forecast-model";
pub const FORMAT_VERSION: u32 = 1;

/// Anything that turns dates into forecasts.
pub trait Forecaster {
    fn name(&self) -> &str;
    fn forecast(&self, dates: &[NaiveDate]) -> Result<Vec<f64>>;

    /// Forecasts consecutive days from `first`, where day `t` may read the
    /// observations strictly before it. The default ignores observations.
    fn forecast_walk_forward(&self, first: NaiveDate, observed: &[Option<f64>]) -> Result<Vec<f64>> {
        let dates: Vec<NaiveDate> = (0..observed.len()).map(|k| first + Duration::days(k as i64)).collect();
        self.forecast(&dates)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    RandomForest,
    ExtraTrees,
    AdaBoost,
    Mlp,
    Lstm,
    NaiveSeasonal,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Mlp,
        ModelKind::RandomForest,
        ModelKind::AdaBoost,
        ModelKind::ExtraTrees,
        ModelKind::Lstm,
        ModelKind::NaiveSeasonal,
    ];

    /// Name used in reports.
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::RandomForest => "RandomForest",
            ModelKind::ExtraTrees => "ExtraTrees",
            ModelKind::AdaBoost => "AdaBoost",
            ModelKind::Mlp => "MLP",
            ModelKind::Lstm => "LSTM",
            ModelKind::NaiveSeasonal => "NaiveSeasonal",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .trim()
            .chars()
            .filter(|c| !matches!(c, '_' | '-'))
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "rf" | "randomforest" => Ok(ModelKind::RandomForest),
            "et" | "extratrees" => Ok(ModelKind::ExtraTrees),
            "adaboost" | "ada" => Ok(ModelKind::AdaBoost),
            "mlp" => Ok(ModelKind::Mlp),
            "lstm" => Ok(ModelKind::Lstm),
            "naive" | "naiveseasonal" => Ok(ModelKind::NaiveSeasonal),
            _ => Err(Error::config(format!(
                "unknown model `{}` (expected rf, extratrees, adaboost, mlp, lstm or naive)",
                s.trim()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmSpec {
    pub hidden: Vec<usize>,
    pub window: WindowSpec,
    pub train: LstmTrainParams,
}

/// A learner and its hyperparameters, ready to fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    RandomForest(ForestParams),
    ExtraTrees(ForestParams),
    AdaBoost(BoostParams),
    Mlp(MlpParams),
    Lstm(LstmSpec),
    NaiveSeasonal { period: usize },
}

impl ModelSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::RandomForest(_) => ModelKind::RandomForest,
            ModelSpec::ExtraTrees(_) => ModelKind::ExtraTrees,
            ModelSpec::AdaBoost(_) => ModelKind::AdaBoost,
            ModelSpec::Mlp(_) => ModelKind::Mlp,
            ModelSpec::Lstm(_) => ModelKind::Lstm,
            ModelSpec::NaiveSeasonal { .. } => ModelKind::NaiveSeasonal,
        }
    }

    pub fn name(&self) -> &'static str {
        self.kind().label()
    }

    /// Fits on a complete training series. Calendar features use
    /// `week_start` to number weekdays.
    pub fn fit(&self, train: &DailySeries, week_start: WeekStart) -> Result<FittedModel> {
        let values = train.dense()?;
        let dates: Vec<NaiveDate> = train.dates().collect();
        let rows = || calendar_rows(&dates, week_start);
        let body = match self {
            ModelSpec::RandomForest(p) | ModelSpec::ExtraTrees(p) => ModelBody::Forest(fit_forest(&rows(), &values, p)?),
            ModelSpec::AdaBoost(p) => ModelBody::AdaBoost(fit_adaboost_r2(&rows(), &values, p)?),
            ModelSpec::Mlp(p) => ModelBody::Mlp(MlpRegressor::fit(&rows(), &values, p)?),
            ModelSpec::Lstm(spec) => ModelBody::Lstm(LstmForecaster::fit(train, spec)?),
            ModelSpec::NaiveSeasonal { period } => ModelBody::Naive(NaiveSeasonal::fit(&values, *period)?),
        };
        Ok(FittedModel {
            name: self.name().to_string(),
            station_code: train.station_code(),
            class: train.class(),
            train_start: train.start_date(),
            train_end: train.end_date(),
            week_start,
            body,
        })
    }
}

/// MLP on min-max scaled calendar features with a min-max scaled target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpRegressor {
    pub scaler: ScalerParams,
    pub target: Normalizer,
    pub network: MlpModel,
}

impl MlpRegressor {
    pub fn fit(rows: &[Vec<f64>], y: &[f64], params: &MlpParams) -> Result<Self> {
        let scaler = fit_scaler_rows(rows, ScaleMode::Minmax01)?;
        let target = Normalizer::fit(y)?;
        let x = scaler.transform_rows(rows)?;
        let t: Vec<f64> = y.iter().map(|&v| target.normalize(v)).collect();
        let network = mlp::train(&x, &t, params)?;
        Ok(MlpRegressor { scaler, target, network })
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        let x = self.scaler.transform_rows(rows)?;
        Ok(self
            .network
            .predict(&x)?
            .into_iter()
            .map(|v| self.target.denormalize(v).max(0.0))
            .collect())
    }
}

/// A trained LSTM plus the final training window it forecasts from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmForecaster {
    pub network: LstmNetwork,
    #[serde(with = "crate::hexfloat::vec")]
    pub history: Vec<f64>,
}

impl LstmForecaster {
    pub fn fit(train: &DailySeries, spec: &LstmSpec) -> Result<Self> {
        let windows = make_windows(train, spec.window)?;
        let network = LstmNetwork::init(&spec.hidden, spec.window, spec.train.seed)?;
        let network = lstm::train_lstm(&windows, network, &spec.train)?;
        let values = train.dense()?;
        let history = values[values.len() - spec.window.lookback..].to_vec();
        Ok(LstmForecaster { network, history })
    }

    /// The next `steps` values after the history, by recursive blocks.
    pub fn multi_step(&self, steps: usize) -> Result<Vec<f64>> {
        let norm = self.network.normalizer;
        let window = self.history.iter().map(|&v| norm.normalize(v)).collect();
        let (out, _) = roll_forward(&self.network, window, steps)?;
        Ok(out.into_iter().map(|v| norm.denormalize(v).max(0.0)).collect())
    }

    /// Walk-forward one-step forecasts for consecutive days following the
    /// history. Day `t` is predicted before `observed[t]` is read; a
    /// missing observation is replaced by the prediction.
    pub fn one_step(&self, observed: &[Option<f64>]) -> Result<Vec<f64>> {
        let norm = self.network.normalizer;
        let lookback = self.network.spec.lookback;
        let mut window: Vec<f64> = self.history.iter().map(|&v| norm.normalize(v)).collect();
        let mut out = Vec::with_capacity(observed.len());
        for actual in observed {
            let p = self.network.forward_sequence(&window[window.len() - lookback..])?[0];
            out.push(norm.denormalize(p).max(0.0));
            window.push(actual.map_or(p, |a| norm.normalize(a)));
        }
        Ok(out)
    }
}

/// Repeats the final weekly (or `period`-day) cycle of the training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveSeasonal {
    pub period: usize,
    #[serde(with = "crate::hexfloat::vec")]
    pub last_cycle: Vec<f64>,
}

impl NaiveSeasonal {
    pub fn fit(values: &[f64], period: usize) -> Result<Self> {
        if period == 0 {
            return Err(Error::config("period must be at least 1"));
        }
        if values.len() < period {
            return Err(Error::precondition(format!(
                "naive seasonal forecasts need at least one full period ({period} days), got {}",
                values.len()
            )));
        }
        Ok(NaiveSeasonal {
            period,
            last_cycle: values[values.len() - period..].to_vec(),
        })
    }

    /// Forecast `h` days after the end of training (h ≥ 1).
    pub fn ahead(&self, h: usize) -> f64 {
        self.last_cycle[(h - 1) % self.period]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelBody {
    Forest(Forest),
    AdaBoost(AdaBoost),
    Mlp(MlpRegressor),
    Lstm(LstmForecaster),
    Naive(NaiveSeasonal),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub name: String,
    pub station_code: u32,
    pub class: VehicleClass,
    pub train_start: NaiveDate,
    pub train_end: NaiveDate,
    pub week_start: WeekStart,
    pub body: ModelBody,
}

#[derive(Serialize, Deserialize)]
struct Envelope<M> {
    format: String,
    version: u32,
    model: M,
}

impl FittedModel {
    /// Days ahead of the training window, or an error for dates inside it.
    fn horizons(&self, dates: &[NaiveDate]) -> Result<Vec<usize>> {
        dates
            .iter()
            .map(|&d| {
                let h = (d - self.train_end).num_days();
                if h < 1 {
                    Err(Error::Domain(format!(
                        "{} forecasts only dates after the training window (ends {}), got {d}",
                        self.name, self.train_end
                    )))
                } else {
                    Ok(h as usize)
                }
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let envelope = Envelope {
            format: FORMAT_NAME.to_string(),
            version: FORMAT_VERSION,
            model: self,
        };
        serde_json::to_string(&envelope).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        match value.get("format").and_then(|f| f.as_str()) {
            Some(FORMAT_NAME) => {}
            other => {
                return Err(Error::Format(format!(
                    "expected format `{FORMAT_NAME}`, found {}",
                    other.map_or("nothing".to_string(), |s| format!("`{s}`"))
                )))
            }
        }
        match value.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == FORMAT_VERSION as u64 => {}
            other => {
                return Err(Error::Format(format!(
                    "unsupported model version {other:?}; this build reads version {FORMAT_VERSION}"
                )))
            }
        }
        let envelope: Envelope<FittedModel> =
            serde_json::from_value(value).map_err(|e| Error::Format(e.to_string()))?;
        Ok(envelope.model)
    }
}

impl Forecaster for FittedModel {
    fn name(&self) -> &str {
        &self.name
    }

    /// LSTM models forecast one step at a time from the true history;
    /// other models ignore `observed`.
    fn forecast_walk_forward(&self, first: NaiveDate, observed: &[Option<f64>]) -> Result<Vec<f64>> {
        match &self.body {
            ModelBody::Lstm(l) => {
                if first != self.train_end + Duration::days(1) {
                    return Err(Error::Domain(format!(
                        "one-step forecasts must start the day after training ends ({})",
                        self.train_end
                    )));
                }
                l.one_step(observed)
            }
            _ => {
                let dates: Vec<NaiveDate> = (0..observed.len()).map(|k| first + Duration::days(k as i64)).collect();
                self.forecast(&dates)
            }
        }
    }

    fn forecast(&self, dates: &[NaiveDate]) -> Result<Vec<f64>> {
        let rows = || calendar_rows(dates, self.week_start);
        match &self.body {
            ModelBody::Forest(f) => f.predict(&rows()),
            ModelBody::AdaBoost(b) => b.predict(&rows()),
            ModelBody::Mlp(m) => m.predict(&rows()),
            ModelBody::Lstm(l) => {
                let h = self.horizons(dates)?;
                let path = l.multi_step(h.iter().copied().max().unwrap_or(0).max(1))?;
                Ok(h.iter().map(|&k| path[k - 1]).collect())
            }
            ModelBody::Naive(n) => Ok(self.horizons(dates)?.into_iter().map(|k| n.ahead(k)).collect()),
        }
    }
}
