//! Date-indexed daily series, CSV ingestion and chronological splitting.
//!
//! Ingestion files carry one row per station-day:
//!
//! ```text
//! STATION_CODE,DATE,TC1,TC2,TC3
//! 7,2014-03-02,1200,300,80
//! ```
//!
//! Records are selected per (station, vehicle class) into a [`DailySeries`],
//! which keeps one slot per calendar day and marks days without a record as
//! missing instead of dropping them.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 5] = ["STATION_CODE", "DATE", "TC1", "TC2", "TC3"];

/// Vehicle class as reported by the toll system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VehicleClass {
    /// Light and small vehicles.
    TC1,
    /// Medium vehicles (vans, small trucks).
    TC2,
    /// Heavy vehicles (trailer trucks, buses).
    TC3,
}

impl VehicleClass {
    pub const ALL: [VehicleClass; 3] = [VehicleClass::TC1, VehicleClass::TC2, VehicleClass::TC3];

    pub fn as_str(self) -> &'static str {
        match self {
            VehicleClass::TC1 => "TC1",
            VehicleClass::TC2 => "TC2",
            VehicleClass::TC3 => "TC3",
        }
    }
}

impl fmt::Display for VehicleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VehicleClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "TC1" => Ok(VehicleClass::TC1),
            "TC2" => Ok(VehicleClass::TC2),
            "TC3" => Ok(VehicleClass::TC3),
            other => Err(Error::config(format!(
                "unknown vehicle class `{other}` (expected TC1, TC2 or TC3)"
            ))),
        }
    }
}

/// One station-day observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrafficRecord {
    pub station_code: u32,
    pub date: NaiveDate,
    pub tc1: u64,
    pub tc2: u64,
    pub tc3: u64,
}

impl TrafficRecord {
    pub fn count(&self, class: VehicleClass) -> u64 {
        match class {
            VehicleClass::TC1 => self.tc1,
            VehicleClass::TC2 => self.tc2,
            VehicleClass::TC3 => self.tc3,
        }
    }
}

/// A gap-aware daily sequence for one station and vehicle class.
///
/// Slot `i` always holds the observation for `start_date + i` days; `None`
/// marks a day with no observation.
#[derive(Debug, Clone, PartialEq)]
pub struct DailySeries {
    station_code: u32,
    class: VehicleClass,
    start_date: NaiveDate,
    values: Vec<Option<f64>>,
}

impl DailySeries {
    pub fn new(
        station_code: u32,
        class: VehicleClass,
        start_date: NaiveDate,
        values: Vec<Option<f64>>,
    ) -> Result<Self> {
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find_map(|(i, v)| v.filter(|x| !(x.is_finite() && *x >= 0.0)).map(|x| (i, x)))
        {
            return Err(Error::Domain(format!(
                "series value {v} at slot {i} is not a finite non-negative number"
            )));
        }
        Ok(DailySeries {
            station_code,
            class,
            start_date,
            values,
        })
    }

    /// Builds a series with every slot present.
    pub fn from_values(
        station_code: u32,
        class: VehicleClass,
        start_date: NaiveDate,
        values: Vec<f64>,
    ) -> Result<Self> {
        Self::new(station_code, class, start_date, values.into_iter().map(Some).collect())
    }

    pub fn station_code(&self) -> u32 {
        self.station_code
    }

    pub fn class(&self) -> VehicleClass {
        self.class
    }

    pub fn start_date(&self) -> NaiveDate {
        self.start_date
    }

    /// Last calendar day covered. For an empty series this is the day before
    /// `start_date`.
    pub fn end_date(&self) -> NaiveDate {
        self.start_date + Duration::days(self.values.len() as i64 - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn date_at(&self, slot: usize) -> NaiveDate {
        self.start_date + Duration::days(slot as i64)
    }

    /// Slot index for `date`, if the date lies inside the span.
    pub fn slot_of(&self, date: NaiveDate) -> Option<usize> {
        let offset = (date - self.start_date).num_days();
        (offset >= 0 && (offset as usize) < self.values.len()).then_some(offset as usize)
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        (0..self.values.len()).map(|i| self.date_at(i))
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.missing_count() == 0
    }

    /// The values as a dense vector; fails if any slot is missing.
    pub fn dense(&self) -> Result<Vec<f64>> {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                v.ok_or_else(|| {
                    Error::precondition(format!(
                        "missing value on {} (impute the series first)",
                        self.date_at(i)
                    ))
                })
            })
            .collect()
    }

    /// Same station, class and start date with new slot contents.
    pub fn with_values(&self, values: Vec<Option<f64>>) -> Result<Self> {
        Self::new(self.station_code, self.class, self.start_date, values)
    }

    pub fn with_dense(&self, values: Vec<f64>) -> Result<Self> {
        self.with_values(values.into_iter().map(Some).collect())
    }

    /// Sub-series covering slots `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        DailySeries {
            station_code: self.station_code,
            class: self.class,
            start_date: self.date_at(range.start),
            values: self.values[range].to_vec(),
        }
    }
}

/// Chronological split point: training ends on `cutoff_date`, inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub cutoff_date: NaiveDate,
}

impl SplitSpec {
    pub fn new(cutoff_date: NaiveDate) -> Self {
        SplitSpec { cutoff_date }
    }
}

pub fn parse_date(s: &str) -> Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
        .map_err(|e| format!("invalid date `{}`: {e}", s.trim()))
}

/// Parses an ingestion CSV (`STATION_CODE,DATE,TC1,TC2,TC3`).
///
/// Line numbers in errors are 1-based and count the header as line 1.
pub fn parse_csv<R: Read>(input: R) -> Result<Vec<TrafficRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);

    let headers = reader.headers().map_err(|e| csv_error(e, 1))?.clone();
    let names: Vec<&str> = headers.iter().collect();
    if names != CSV_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header `{}`, found `{}`",
                CSV_HEADER.join(","),
                names.join(",")
            ),
        });
    }

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(e, 0))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| row.get(i).unwrap_or("");
        let fail = |message: String| Error::Parse { line, message };

        let station_code = field(0)
            .parse::<u32>()
            .map_err(|_| fail(format!("invalid station code `{}`", field(0))))?;
        let date = parse_date(field(1)).map_err(fail)?;
        let mut counts = [0u64; 3];
        for (k, name) in ["TC1", "TC2", "TC3"].iter().enumerate() {
            let raw = field(2 + k);
            let parsed: i64 = raw
                .parse()
                .map_err(|_| fail(format!("invalid {name} count `{raw}`")))?;
            if parsed < 0 {
                return Err(fail(format!("negative {name} count {parsed}")));
            }
            counts[k] = parsed as u64;
        }
        records.push(TrafficRecord {
            station_code,
            date,
            tc1: counts[0],
            tc2: counts[1],
            tc3: counts[2],
        });
    }
    Ok(records)
}

fn csv_error(err: csv::Error, fallback_line: u64) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(fallback_line);
    let message = match err.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            format!("expected {expected_len} columns, found {len}")
        }
        _ => err.to_string(),
    };
    Error::Parse { line, message }
}

/// Serializes records in the ingestion format (LF line endings).
pub fn write_csv(records: &[TrafficRecord]) -> String {
    let mut out = String::with_capacity(32 * (records.len() + 1));
    out.push_str(&CSV_HEADER.join(","));
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.station_code,
            r.date.format("%Y-%m-%d"),
            r.tc1,
            r.tc2,
            r.tc3
        ));
    }
    out
}

/// Selects one station and class from `records` into a gap-aware series
/// spanning the first to the last matching date.
pub fn to_series(
    records: &[TrafficRecord],
    station: u32,
    class: VehicleClass,
) -> Result<DailySeries> {
    let mut by_date = BTreeMap::new();
    for r in records.iter().filter(|r| r.station_code == station) {
        if by_date.insert(r.date, r.count(class) as f64).is_some() {
            return Err(Error::Duplicate {
                station,
                date: r.date,
            });
        }
    }
    let (first, last) = match (by_date.keys().next(), by_date.keys().next_back()) {
        (Some(&f), Some(&l)) => (f, l),
        _ => {
            return Err(Error::EmptySelection {
                station,
                class: class.to_string(),
            })
        }
    };
    let len = (last - first).num_days() as usize + 1;
    let mut values = vec![None; len];
    for (date, v) in by_date {
        values[(date - first).num_days() as usize] = Some(v);
    }
    DailySeries::new(station, class, first, values)
}

/// Splits `series` into the days up to and including the cutoff, and the
/// days after it.
pub fn split_train_test(series: &DailySeries, spec: SplitSpec) -> Result<(DailySeries, DailySeries)> {
    if series.is_empty() {
        return Err(Error::Range("cannot split an empty series".into()));
    }
    let cutoff = spec.cutoff_date;
    if cutoff < series.start_date() || cutoff >= series.end_date() {
        return Err(Error::Range(format!(
            "cutoff {cutoff} must lie in [{}, {}) so both windows are non-empty",
            series.start_date(),
            series.end_date()
        )));
    }
    let n_train = (cutoff - series.start_date()).num_days() as usize + 1;
    Ok((series.slice(0..n_train), series.slice(n_train..series.len())))
}
