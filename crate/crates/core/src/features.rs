//! Calendar feature engineering and feature scaling.
//!
//! Each day becomes one row of the learning matrix:
//!
//! | column | meaning |
//! |---|---|
//! | `YEAR`, `MONTH`, `DAY` | calendar date parts |
//! | `WEEK` | ISO-8601 week number |
//! | `DAY_OF_WEEK` | 0..=6, Monday = 0 by default |
//! | `DAY_OF_YEAR` | 1..=366 |
//! | `IS_WEEKEND` | 1 on Saturday and Sunday |
//! | `DOW_0`..`DOW_6` | one-hot day-of-week indicators |
//!
//! `DAY_OF_WEEK` is kept next to its indicators so tree models can use
//! either encoding.

use std::str::FromStr;

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::DailySeries;

pub const FEATURE_COLUMNS: [&str; 14] = [
    "YEAR",
    "MONTH",
    "WEEK",
    "DAY",
    "DAY_OF_WEEK",
    "DAY_OF_YEAR",
    "IS_WEEKEND",
    "DOW_0",
    "DOW_1",
    "DOW_2",
    "DOW_3",
    "DOW_4",
    "DOW_5",
    "DOW_6",
];

/// Which weekday is numbered 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeekStart {
    #[default]
    Monday,
    Sunday,
}

impl FromStr for WeekStart {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "monday" => Ok(WeekStart::Monday),
            "sunday" => Ok(WeekStart::Sunday),
            other => Err(Error::config(format!("unknown week start `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CalendarRow {
    pub year: i32,
    pub month: u32,
    pub week: u32,
    pub day: u32,
    pub day_of_week: u32,
    pub day_of_year: u32,
    pub is_weekend: bool,
    pub dow_onehot: [u8; 7],
}

impl CalendarRow {
    pub fn to_features(&self) -> Vec<f64> {
        let mut row = vec![
            self.year as f64,
            self.month as f64,
            self.week as f64,
            self.day as f64,
            self.day_of_week as f64,
            self.day_of_year as f64,
            if self.is_weekend { 1.0 } else { 0.0 },
        ];
        row.extend(self.dow_onehot.iter().map(|&b| b as f64));
        row
    }
}

pub fn explode_date(date: NaiveDate) -> CalendarRow {
    explode_date_with(date, WeekStart::Monday)
}

pub fn explode_date_with(date: NaiveDate, start: WeekStart) -> CalendarRow {
    let weekday = date.weekday();
    let day_of_week = match start {
        WeekStart::Monday => weekday.num_days_from_monday(),
        WeekStart::Sunday => weekday.num_days_from_sunday(),
    };
    let mut dow_onehot = [0u8; 7];
    dow_onehot[day_of_week as usize] = 1;
    CalendarRow {
        year: date.year(),
        month: date.month(),
        week: date.iso_week().week(),
        day: date.day(),
        day_of_week,
        day_of_year: date.ordinal(),
        is_weekend: matches!(weekday, Weekday::Sat | Weekday::Sun),
        dow_onehot,
    }
}

/// Feature rows for arbitrary dates, in the fixed column order.
pub fn calendar_rows(dates: &[NaiveDate], start: WeekStart) -> Vec<Vec<f64>> {
    dates
        .iter()
        .map(|&d| explode_date_with(d, start).to_features())
        .collect()
}

/// The learning matrix: one row per day plus its target.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub station_code: u32,
    pub column_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub dates: Vec<NaiveDate>,
}

impl FeatureMatrix {
    pub fn new(
        station_code: u32,
        column_names: Vec<String>,
        rows: Vec<Vec<f64>>,
        targets: Vec<f64>,
        dates: Vec<NaiveDate>,
    ) -> Result<Self> {
        if rows.len() != targets.len() || rows.len() != dates.len() {
            return Err(Error::precondition(format!(
                "{} rows, {} targets and {} dates must have equal length",
                rows.len(),
                targets.len(),
                dates.len()
            )));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != column_names.len()) {
            return Err(Error::Shape {
                expected: column_names.len(),
                got: bad.len(),
            });
        }
        Ok(FeatureMatrix {
            station_code,
            column_names,
            rows,
            targets,
            dates,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn width(&self) -> usize {
        self.column_names.len()
    }

    /// CSV with `DATE`, the feature columns, then `TARGET`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("DATE,");
        out.push_str(&self.column_names.join(","));
        out.push_str(",TARGET\n");
        for ((date, row), target) in self.dates.iter().zip(&self.rows).zip(&self.targets) {
            out.push_str(&date.format("%Y-%m-%d").to_string());
            for v in row {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push(',');
            out.push_str(&target.to_string());
            out.push('\n');
        }
        out
    }
}

pub fn build_matrix(series: &DailySeries) -> Result<FeatureMatrix> {
    build_matrix_with(series, WeekStart::Monday)
}

pub fn build_matrix_with(series: &DailySeries, start: WeekStart) -> Result<FeatureMatrix> {
    let targets = series.dense()?;
    let dates: Vec<NaiveDate> = series.dates().collect();
    let rows = calendar_rows(&dates, start);
    FeatureMatrix::new(
        series.station_code(),
        FEATURE_COLUMNS.iter().map(|s| s.to_string()).collect(),
        rows,
        targets,
        dates,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleMode {
    #[default]
    Minmax01,
    Standardize,
}

impl FromStr for ScaleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "minmax01" | "minmax" => Ok(ScaleMode::Minmax01),
            "standardize" => Ok(ScaleMode::Standardize),
            other => Err(Error::config(format!("unknown scale mode `{other}`"))),
        }
    }
}

/// Per-column affine scaling learned from training rows.
///
/// In min-max mode `offset` is the column minimum and `spread` its range;
/// in standardize mode they are the mean and population standard deviation.
/// A zero spread marks a constant column, which scales to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub mode: ScaleMode,
    #[serde(with = "crate::hexfloat::vec")]
    pub offset: Vec<f64>,
    #[serde(with = "crate::hexfloat::vec")]
    pub spread: Vec<f64>,
}

impl ScalerParams {
    pub fn width(&self) -> usize {
        self.offset.len()
    }

    pub fn transform_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.width() {
            return Err(Error::Shape {
                expected: self.width(),
                got: row.len(),
            });
        }
        Ok(row
            .iter()
            .zip(self.offset.iter().zip(&self.spread))
            .map(|(v, (o, s))| if *s > 0.0 { (v - o) / s } else { 0.0 })
            .collect())
    }

    /// Inverse of [`transform_row`](Self::transform_row). Constant columns
    /// map back to their training value.
    pub fn inverse_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.width() {
            return Err(Error::Shape {
                expected: self.width(),
                got: row.len(),
            });
        }
        Ok(row
            .iter()
            .zip(self.offset.iter().zip(&self.spread))
            .map(|(v, (o, s))| if *s > 0.0 { v * s + o } else { *o })
            .collect())
    }

    pub fn transform_rows(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.transform_row(r)).collect()
    }
}

pub fn fit_scaler_rows(rows: &[Vec<f64>], mode: ScaleMode) -> Result<ScalerParams> {
    let width = match rows.first() {
        Some(r) => r.len(),
        None => return Err(Error::precondition("cannot fit a scaler on an empty matrix")),
    };
    if let Some(bad) = rows.iter().find(|r| r.len() != width) {
        return Err(Error::Shape {
            expected: width,
            got: bad.len(),
        });
    }
    let n = rows.len() as f64;
    let mut offset = Vec::with_capacity(width);
    let mut spread = Vec::with_capacity(width);
    for j in 0..width {
        let col = rows.iter().map(|r| r[j]);
        match mode {
            ScaleMode::Minmax01 => {
                let (lo, hi) = col.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    (lo.min(v), hi.max(v))
                });
                offset.push(lo);
                spread.push(hi - lo);
            }
            ScaleMode::Standardize => {
                let mean = col.clone().sum::<f64>() / n;
                let var = col.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                offset.push(mean);
                spread.push(var.sqrt());
            }
        }
    }
    Ok(ScalerParams { mode, offset, spread })
}

pub fn fit_scaler(matrix: &FeatureMatrix, mode: ScaleMode) -> Result<ScalerParams> {
    fit_scaler_rows(&matrix.rows, mode)
}

pub fn apply_scaler(matrix: &FeatureMatrix, params: &ScalerParams) -> Result<FeatureMatrix> {
    Ok(FeatureMatrix {
        rows: params.transform_rows(&matrix.rows)?,
        ..matrix.clone()
    })
}
