//! Smoothing and seasonal-adjustment filters applied before modeling.
//!
//! Windowed filters (median, moving average) use a centered window that is
//! clipped to the series bounds, so output length always equals input
//! length. All filters expect a complete series; run [`impute_missing`]
//! first.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::DailySeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    None,
    Median,
    MovingAverage,
    Exponential,
    Deseasonalize,
}

impl FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "none" => FilterKind::None,
            "median" => FilterKind::Median,
            "moving_average" | "ma" => FilterKind::MovingAverage,
            "exponential" | "ema" => FilterKind::Exponential,
            "deseasonalize" => FilterKind::Deseasonalize,
            other => return Err(Error::config(format!("unknown filter `{other}`"))),
        })
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FilterKind::None => "none",
            FilterKind::Median => "median",
            FilterKind::MovingAverage => "moving_average",
            FilterKind::Exponential => "exponential",
            FilterKind::Deseasonalize => "deseasonalize",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub kind: FilterKind,
    pub window: usize,
    #[serde(with = "crate::hexfloat")]
    pub alpha: f64,
    pub period: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            kind: FilterKind::Median,
            window: 5,
            alpha: 0.3,
            period: 7,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.window.is_multiple_of(2) {
            return Err(Error::config(format!(
                "window must be a positive odd integer, got {}",
                self.window
            )));
        }
        check_alpha(self.alpha)?;
        if self.period < 2 {
            return Err(Error::config(format!("period must be at least 2, got {}", self.period)));
        }
        Ok(())
    }

    /// Imputes missing days, then applies the configured filter. Seasonal
    /// indices from a deseasonalize filter are discarded.
    pub fn apply(&self, series: &DailySeries) -> Result<DailySeries> {
        self.validate()?;
        let imputed = impute_missing(series)?;
        match self.kind {
            FilterKind::None => Ok(imputed),
            FilterKind::Median => median_filter(&imputed, self.window),
            FilterKind::MovingAverage => moving_average(&imputed, self.window),
            FilterKind::Exponential => exponential_moving_average(&imputed, self.alpha),
            FilterKind::Deseasonalize => deseasonalize(&imputed, self.period).map(|(s, _)| s),
        }
    }
}

/// Multiplicative per-position seasonal factors with mean 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonalIndices {
    indices: Vec<f64>,
}

impl SeasonalIndices {
    pub fn new(indices: Vec<f64>) -> Result<Self> {
        if indices.len() < 2 {
            return Err(Error::config("seasonal period must be at least 2"));
        }
        if indices.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Domain("seasonal indices must be positive".into()));
        }
        let mean = indices.iter().sum::<f64>() / indices.len() as f64;
        if (mean - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("seasonal indices have mean {mean}, expected 1")));
        }
        Ok(SeasonalIndices { indices })
    }

    pub fn period(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[f64] {
        &self.indices
    }
}

fn check_window(series_len: usize, window: usize) -> Result<()> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::config(format!("window must be odd and positive, got {window}")));
    }
    if window > series_len {
        return Err(Error::config(format!(
            "window {window} is longer than the series ({series_len} days)"
        )));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::config(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    Ok(())
}

fn windowed(
    series: &DailySeries,
    window: usize,
    reduce: impl Fn(&[f64]) -> f64,
) -> Result<DailySeries> {
    let values = series.dense()?;
    check_window(values.len(), window)?;
    let half = window / 2;
    let out = (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(values.len());
            reduce(&values[lo..hi])
        })
        .collect();
    series.with_dense(out)
}

pub(crate) fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Centered running median. At the edges the window is truncated to the
/// available days; an even-sized truncated window takes the mean of its two
/// middle values.
pub fn median_filter(series: &DailySeries, window: usize) -> Result<DailySeries> {
    windowed(series, window, median)
}

/// Centered running mean with the same edge policy as [`median_filter`].
pub fn moving_average(series: &DailySeries, window: usize) -> Result<DailySeries> {
    windowed(series, window, |w| w.iter().sum::<f64>() / w.len() as f64)
}

pub fn exponential_moving_average(series: &DailySeries, alpha: f64) -> Result<DailySeries> {
    check_alpha(alpha)?;
    let values = series.dense()?;
    let mut out = Vec::with_capacity(values.len());
    for (t, &v) in values.iter().enumerate() {
        // prev + alpha * (v - prev) keeps constant series exactly constant
        let smoothed = if t == 0 || alpha == 1.0 {
            v
        } else {
            let prev: f64 = out[t - 1];
            prev + alpha * (v - prev)
        };
        out.push(smoothed);
    }
    series.with_dense(out)
}

/// Removes a multiplicative periodic component. Position `k` of the cycle is
/// slot `k` of the series modulo `period`.
pub fn deseasonalize(series: &DailySeries, period: usize) -> Result<(DailySeries, SeasonalIndices)> {
    if period < 2 {
        return Err(Error::config(format!("period must be at least 2, got {period}")));
    }
    let values = series.dense()?;
    if values.len() < 2 * period {
        return Err(Error::precondition(format!(
            "deseasonalizing with period {period} needs at least {} days, got {}",
            2 * period,
            values.len()
        )));
    }
    if let Some(v) = values.iter().find(|v| **v <= 0.0) {
        return Err(Error::Domain(format!(
            "multiplicative deseasonalization needs positive values, found {v}"
        )));
    }

    let mut sums = vec![0.0; period];
    let mut counts = vec![0usize; period];
    for (i, v) in values.iter().enumerate() {
        sums[i % period] += v;
        counts[i % period] += 1;
    }
    let grand_mean = values.iter().sum::<f64>() / values.len() as f64;
    let raw: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| s / c as f64 / grand_mean)
        .collect();
    let norm = raw.iter().sum::<f64>() / period as f64;
    let indices = SeasonalIndices::new(raw.iter().map(|r| r / norm).collect())?;

    let adjusted = values
        .iter()
        .enumerate()
        .map(|(i, v)| v / indices.indices[i % period])
        .collect();
    Ok((series.with_dense(adjusted)?, indices))
}

/// Re-applies seasonal factors; slot 0 of `series` takes index `phase`.
pub fn reseasonalize(
    series: &DailySeries,
    indices: &SeasonalIndices,
    phase: usize,
) -> Result<DailySeries> {
    let values = series.dense()?;
    let p = indices.period();
    let out = values
        .iter()
        .enumerate()
        .map(|(i, v)| v * indices.indices[(phase + i) % p])
        .collect();
    series.with_dense(out)
}

/// Fills missing slots by linear interpolation between the nearest present
/// neighbours; leading and trailing gaps copy the nearest present value.
pub fn impute_missing(series: &DailySeries) -> Result<DailySeries> {
    let values = series.values();
    let present: Vec<usize> = (0..values.len()).filter(|&i| values[i].is_some()).collect();
    let (&first, &last) = match (present.first(), present.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::precondition("cannot impute a series with no observations")),
    };

    let mut out: Vec<f64> = values.iter().map(|v| v.unwrap_or(0.0)).collect();
    let head = out[first];
    out[..first].iter_mut().for_each(|v| *v = head);
    let tail = out[last];
    out[last + 1..].iter_mut().for_each(|v| *v = tail);
    for pair in present.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b - a > 1 {
            let (va, vb) = (out[a], out[b]);
            let span = (b - a) as f64;
            for (step, slot) in out[a + 1..b].iter_mut().enumerate() {
                let t = (step + 1) as f64 / span;
                *slot = va + t * (vb - va);
            }
        }
    }
    series.with_dense(out)
}
