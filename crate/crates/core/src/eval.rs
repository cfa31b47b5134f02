//! SMAPE scoring, the naive seasonal floor, and model comparison.
//!
//! ```text
//! SMAPE = 100/n · Σ |F_t − A_t| / ((|A_t| + |F_t|) / 2)
//! ```
//!
//! A term with `A_t = F_t = 0` contributes 0, so for non-negative inputs
//! the score lies in [0, 200].

use std::fmt::Write as _;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::WeekStart;
use crate::lstm::ForecastMode;
use crate::model::{Forecaster, ModelSpec, NaiveSeasonal};
use crate::preprocess::FilterConfig;
use crate::series::DailySeries;

pub fn smape(actual: &[f64], forecast: &[f64]) -> Result<f64> {
    if actual.len() != forecast.len() {
        return Err(Error::Shape {
            expected: actual.len(),
            got: forecast.len(),
        });
    }
    if actual.is_empty() {
        return Err(Error::precondition("SMAPE of an empty sequence"));
    }
    let total: f64 = actual
        .iter()
        .zip(forecast)
        .map(|(a, f)| {
            let denom = (a.abs() + f.abs()) / 2.0;
            if denom == 0.0 {
                0.0
            } else {
                (f - a).abs() / denom
            }
        })
        .sum();
    Ok(100.0 * total / actual.len() as f64)
}

/// Forecasts `horizon` days after `train` ends by repeating the value one
/// full `period` earlier.
pub fn naive_seasonal(train: &DailySeries, horizon: usize, period: usize) -> Result<Vec<f64>> {
    let model = NaiveSeasonal::fit(&train.dense()?, period)?;
    Ok((1..=horizon).map(|h| model.ahead(h)).collect())
}

/// Which test values a forecast is scored against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreAgainst {
    /// Measured values; missing days are not scored.
    #[default]
    Raw,
    /// The test series passed through the same filter as training.
    Filtered,
}

impl std::str::FromStr for ScoreAgainst {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "raw" => Ok(ScoreAgainst::Raw),
            "filtered" => Ok(ScoreAgainst::Filtered),
            other => Err(Error::config(format!("unknown scoring target `{other}` (raw or filtered)"))),
        }
    }
}

impl std::fmt::Display for ScoreAgainst {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScoreAgainst::Raw => "raw",
            ScoreAgainst::Filtered => "filtered",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PipelineConfig {
    pub filter: FilterConfig,
    pub score_against: ScoreAgainst,
    pub lstm_mode: ForecastMode,
    pub week_start: WeekStart,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DayRecord {
    pub date: NaiveDate,
    /// The value scored against; `None` when the day was not scored.
    pub actual: Option<f64>,
    pub forecast: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub model: String,
    pub smape: f64,
    pub days: Vec<DayRecord>,
    pub train_start: NaiveDate,
    pub train_end: NaiveDate,
    pub test_start: NaiveDate,
    pub test_end: NaiveDate,
    pub scored_against: ScoreAgainst,
}

pub const REPORT_HEADER: &str = "MODEL,SMAPE_PCT,TRAIN_START,TRAIN_END,TEST_START,TEST_END";
pub const DAYS_HEADER: &str = "DATE,ACTUAL,FORECAST";

impl EvalReport {
    pub fn scored_days(&self) -> usize {
        self.days.iter().filter(|d| d.actual.is_some()).count()
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.3},{},{},{},{}",
            self.model, self.smape, self.train_start, self.train_end, self.test_start, self.test_end
        )
    }

    pub fn to_csv(&self) -> String {
        format!("{REPORT_HEADER}\n{}\n", self.csv_row())
    }

    /// `DATE,ACTUAL,FORECAST`, with an empty `ACTUAL` on unscored days.
    pub fn days_csv(&self) -> String {
        let mut out = String::from(DAYS_HEADER);
        out.push('\n');
        for d in &self.days {
            let actual = d.actual.map(|a| a.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{}", d.date, actual, d.forecast);
        }
        out
    }
}

fn check_windows(train: &DailySeries, test: &DailySeries) -> Result<()> {
    if train.end_date() >= test.start_date() {
        return Err(Error::Leakage(format!(
            "training window ends {} but the test window starts {}",
            train.end_date(),
            test.start_date()
        )));
    }
    Ok(())
}

/// Fits `spec` on the filtered training series and scores it on `test`.
pub fn evaluate(spec: &ModelSpec, train: &DailySeries, test: &DailySeries, config: &PipelineConfig) -> Result<EvalReport> {
    check_windows(train, test)?;
    let prepared = config.filter.apply(train)?;
    let fitted = spec.fit(&prepared, config.week_start)?;
    evaluate_fitted(&fitted, &prepared, test, config)
}

/// Scores an already fitted forecaster. The forecaster only receives test
/// dates, except that walk-forward one-step mode may read each actual after
/// the day has been forecast.
pub fn evaluate_fitted(
    model: &dyn Forecaster,
    train: &DailySeries,
    test: &DailySeries,
    config: &PipelineConfig,
) -> Result<EvalReport> {
    check_windows(train, test)?;
    let dates: Vec<NaiveDate> = test.dates().collect();
    let forecasts = match config.lstm_mode {
        ForecastMode::MultiStep => model.forecast(&dates)?,
        ForecastMode::OneStep => model.forecast_walk_forward(test.start_date(), test.values())?,
    };
    if forecasts.len() != dates.len() {
        return Err(Error::Shape {
            expected: dates.len(),
            got: forecasts.len(),
        });
    }
    let targets: Vec<Option<f64>> = match config.score_against {
        ScoreAgainst::Raw => test.values().to_vec(),
        ScoreAgainst::Filtered => config.filter.apply(test)?.values().to_vec(),
    };
    let (a, f): (Vec<f64>, Vec<f64>) = targets
        .iter()
        .zip(&forecasts)
        .filter_map(|(a, f)| a.map(|a| (a, *f)))
        .unzip();
    if a.is_empty() {
        return Err(Error::precondition("the test window has no observed days to score"));
    }
    let score = smape(&a, &f)?;
    Ok(EvalReport {
        model: model.name().to_string(),
        smape: score,
        days: dates
            .iter()
            .zip(&targets)
            .zip(&forecasts)
            .map(|((&date, &actual), &forecast)| DayRecord { date, actual, forecast })
            .collect(),
        train_start: train.start_date(),
        train_end: train.end_date(),
        test_start: test.start_date(),
        test_end: test.end_date(),
        scored_against: config.score_against,
    })
}

/// Reports sorted by ascending SMAPE; ties keep input order.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub reports: Vec<EvalReport>,
}

/// Evaluates every spec (in parallel) on the same split.
pub fn compare(specs: &[ModelSpec], train: &DailySeries, test: &DailySeries, config: &PipelineConfig) -> Result<Comparison> {
    let reports = specs
        .par_iter()
        .map(|spec| evaluate(spec, train, test, config))
        .collect::<Result<Vec<_>>>()?;
    Ok(Comparison::from_reports(reports))
}

impl Comparison {
    pub fn from_reports(mut reports: Vec<EvalReport>) -> Self {
        reports.sort_by(|a, b| a.smape.total_cmp(&b.smape));
        Comparison { reports }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(REPORT_HEADER);
        out.push('\n');
        for r in &self.reports {
            out.push_str(&r.csv_row());
            out.push('\n');
        }
        out
    }

    /// Plain-text table with SMAPE to one decimal place.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(r) = self.reports.first() {
            let _ = writeln!(
                out,
                "train {}..{}  test {}..{}  scored against {} actuals",
                r.train_start, r.train_end, r.test_start, r.test_end, r.scored_against
            );
        }
        let width = self.reports.iter().map(|r| r.model.len()).max().unwrap_or(5).max(5);
        let _ = writeln!(out, "{:<width$}  {:>9}", "MODEL", "SMAPE (%)");
        for r in &self.reports {
            let _ = writeln!(out, "{:<width$}  {:>9.1}", r.model, r.smape);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::VehicleClass;
    use approx::assert_relative_eq;

    #[test]
    fn smape_examples() {
        assert_eq!(smape(&[3.0, 0.0, 7.5], &[3.0, 0.0, 7.5]).unwrap(), 0.0);
        assert_relative_eq!(smape(&[100.0], &[50.0]).unwrap(), 200.0 / 3.0, max_relative = 1e-15);
        assert_eq!(smape(&[0.0], &[10.0]).unwrap(), 200.0);
        assert!(smape(&[], &[]).is_err());
        assert!(smape(&[1.0], &[1.0, 2.0]).is_err());
    }

    fn series(start: NaiveDate, values: Vec<f64>) -> DailySeries {
        DailySeries::from_values(1, VehicleClass::TC1, start, values).unwrap()
    }

    #[test]
    fn naive_examples() {
        let d = NaiveDate::from_ymd_opt(2016, 1, 4).unwrap();
        let linear = series(d, (1..=14).map(|v| v as f64).collect());
        assert_eq!(naive_seasonal(&linear, 7, 7).unwrap(), vec![8., 9., 10., 11., 12., 13., 14.]);
        let flat = series(d, vec![5.0; 10]);
        assert_eq!(naive_seasonal(&flat, 20, 7).unwrap(), vec![5.0; 20]);
    }

    #[test]
    fn leakage_is_rejected() {
        let d = NaiveDate::from_ymd_opt(2016, 1, 4).unwrap();
        let s = series(d, (0..30).map(|v| (v % 7) as f64 + 1.0).collect());
        let err = evaluate(&ModelSpec::NaiveSeasonal { period: 7 }, &s, &s.slice(20..30), &PipelineConfig::default())
            .unwrap_err();
        assert!(matches!(err, Error::Leakage(_)), "{err}");
    }

    #[test]
    fn periodic_series_scores_zero_for_naive() {
        let d = NaiveDate::from_ymd_opt(2016, 1, 4).unwrap();
        let s = series(d, (0..70).map(|v| 10.0 * ((v % 7) as f64 + 1.0)).collect());
        let config = PipelineConfig {
            filter: FilterConfig {
                kind: crate::preprocess::FilterKind::None,
                ..FilterConfig::default()
            },
            ..PipelineConfig::default()
        };
        let report = evaluate(&ModelSpec::NaiveSeasonal { period: 7 }, &s.slice(0..56), &s.slice(56..70), &config).unwrap();
        assert_eq!(report.smape, 0.0);
        assert_eq!(report.days.len(), 14);
        assert!(report.days_csv().starts_with("DATE,ACTUAL,FORECAST\n"));
    }

    #[test]
    fn stable_sort() {
        let d = NaiveDate::from_ymd_opt(2016, 1, 4).unwrap();
        let mk = |name: &str, smape: f64| EvalReport {
            model: name.into(),
            smape,
            days: vec![],
            train_start: d,
            train_end: d,
            test_start: d,
            test_end: d,
            scored_against: ScoreAgainst::Raw,
        };
        let c = Comparison::from_reports(vec![mk("b", 3.0), mk("a", 1.0), mk("c", 3.0)]);
        let names: Vec<&str> = c.reports.iter().map(|r| r.model.as_str()).collect();
        assert_eq!(names, ["a", "b", "c"]);
        assert_eq!(c.to_csv().lines().count(), 4);
        assert!(c.to_text().contains("1.0"));
    }
}
