//! Self-contained SVG line charts of measured against forecast traffic.

use std::fmt::Write as _;

use chrono::{Datelike, NaiveDate};

use crate::error::{Error, Result};

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 300.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 16.0;
const TOP: f64 = 28.0;
const BOTTOM: f64 = 36.0;
const MAX_TICKS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    pub date: NaiveDate,
    pub measured: Option<f64>,
    pub forecast: Option<f64>,
}

/// Parses a `DATE,ACTUAL,FORECAST` file; empty cells are gaps.
pub fn parse_days_csv(text: &str) -> Result<Vec<ChartPoint>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["DATE", "ACTUAL", "FORECAST"] {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header DATE,ACTUAL,FORECAST, found {}", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut points = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i as u64 + 2;
        let record = record.map_err(|e| Error::Parse { line, message: e.to_string() })?;
        let cell = |k: usize| -> Result<Option<f64>> {
            let s = record.get(k).unwrap_or("");
            if s.is_empty() {
                return Ok(None);
            }
            s.parse::<f64>()
                .map(Some)
                .map_err(|_| Error::Parse { line, message: format!("invalid number `{s}`") })
        };
        let date = crate::series::parse_date(record.get(0).unwrap_or(""))
            .map_err(|message| Error::Parse { line, message })?;
        points.push(ChartPoint {
            date,
            measured: cell(1)?,
            forecast: cell(2)?,
        });
    }
    if points.is_empty() {
        return Err(Error::precondition("nothing to plot"));
    }
    Ok(points)
}

/// 800×300 chart: measured values as a thin line, forecasts as a thick
/// one, month ticks along the date axis and a legend.
pub fn render_svg(points: &[ChartPoint], title: &str) -> Result<String> {
    if points.is_empty() {
        return Err(Error::precondition("nothing to plot"));
    }
    let first = points[0].date;
    let span = (points[points.len() - 1].date - first).num_days().max(1) as f64;
    let y_max = points
        .iter()
        .flat_map(|p| [p.measured, p.forecast])
        .flatten()
        .fold(0.0_f64, f64::max)
        .max(1.0)
        * 1.05;
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x = |d: NaiveDate| LEFT + plot_w * (d - first).num_days() as f64 / span;
    let y = |v: f64| TOP + plot_h * (1.0 - v / y_max);
    let polyline = |pick: fn(&ChartPoint) -> Option<f64>| -> String {
        points
            .iter()
            .filter_map(|p| pick(p).map(|v| format!("{:.1},{:.1}", x(p.date), y(v))))
            .collect::<Vec<_>>()
            .join(" ")
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{LEFT}" y="18" font-size="13">{}</text>"#, escape(title));

    // axes
    let _ = writeln!(
        svg,
        r#"<path d="M{LEFT},{TOP} V{:.1} H{:.1}" fill="none" stroke="black" stroke-width="1"/>"#,
        TOP + plot_h,
        LEFT + plot_w
    );
    for k in 0..=4 {
        let v = y_max * k as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.0}</text>"#,
            LEFT - 6.0,
            y(v) + 4.0,
            v
        );
    }
    let months = month_starts(first, points[points.len() - 1].date);
    let stride = months.len().div_ceil(MAX_TICKS).max(1);
    for m in months.iter().step_by(stride) {
        let _ = writeln!(
            svg,
            r#"<line x1="{0:.1}" y1="{1:.1}" x2="{0:.1}" y2="{2:.1}" stroke="black"/><text x="{0:.1}" y="{3:.1}" text-anchor="middle">{4}</text>"#,
            x(*m),
            TOP + plot_h,
            TOP + plot_h + 4.0,
            TOP + plot_h + 16.0,
            m.format("%Y-%m")
        );
    }

    let _ = writeln!(
        svg,
        r##"<polyline id="measured" points="{}" fill="none" stroke="#1f77b4" stroke-width="1"/>"##,
        polyline(|p| p.measured)
    );
    let _ = writeln!(
        svg,
        r##"<polyline id="forecast" points="{}" fill="none" stroke="#d62728" stroke-width="2.5"/>"##,
        polyline(|p| p.forecast)
    );

    let lx = WIDTH - RIGHT - 120.0;
    let _ = writeln!(
        svg,
        r##"<g id="legend"><line x1="{lx}" y1="12" x2="{}" y2="12" stroke="#1f77b4" stroke-width="1"/><text x="{}" y="16">measured</text><line x1="{lx}" y1="24" x2="{}" y2="24" stroke="#d62728" stroke-width="2.5"/><text x="{}" y="28">forecast</text></g>"##,
        lx + 24.0,
        lx + 30.0,
        lx + 24.0,
        lx + 30.0
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn month_starts(from: NaiveDate, to: NaiveDate) -> Vec<NaiveDate> {
    let mut out = Vec::new();
    let mut m = NaiveDate::from_ymd_opt(from.year(), from.month(), 1).expect("first of month");
    if m < from {
        m = m.checked_add_months(chrono::Months::new(1)).expect("date in range");
    }
    while m <= to {
        out.push(m);
        m = m.checked_add_months(chrono::Months::new(1)).expect("date in range");
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_polylines_and_legend() {
        let csv = "DATE,ACTUAL,FORECAST\n2016-06-01,10,12\n2016-06-02,,11\n2016-07-15,14,13\n";
        let points = parse_days_csv(csv).unwrap();
        assert_eq!(points[1].measured, None);
        let svg = render_svg(&points, "TC1 <101>").unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("2016-07"));
        assert!(svg.contains("&lt;101&gt;"));
        assert!(svg.contains(r#"width="800" height="300""#));
        assert!(svg.contains("legend"));
    }

    #[test]
    fn bad_header() {
        assert!(matches!(parse_days_csv("A,B,C\n"), Err(Error::Parse { line: 1, .. })));
    }
}
