//! Case-count CSV ingestion and regression series.
//!
//! Input follows the JHU / Kaggle "grouped" layout: one row per country and
//! day with cumulative `Confirmed`, `Deaths` and `Recovered`. Rows repeated
//! for the same country and day (provincial rows) are summed. Cumulative dips
//! from reporting corrections are clamped to the running maximum.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MIN_REGRESSION_POINTS: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum DataError {
    /// `row` is the 1-based data row (header excluded); 0 means the header.
    #[error("malformed CSV at row {row}: {message}")]
    MalformedCsv { row: usize, message: String },
    #[error("unknown country {0:?}")]
    UnknownCountry(String),
    #[error("no data for {country} between {start} and {end}")]
    EmptyWindow { country: String, start: NaiveDate, end: NaiveDate },
    #[error("need at least {need} points with count >= 1, have {have}")]
    TooFewPoints { have: usize, need: usize },
    #[error("I/O error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Confirmed,
    Deaths,
    Recovered,
}

impl std::str::FromStr for Field {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "confirmed" => Ok(Field::Confirmed),
            "deaths" => Ok(Field::Deaths),
            "recovered" => Ok(Field::Recovered),
            other => Err(format!("unknown field {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseRow {
    pub date: NaiveDate,
    pub country: String,
    pub confirmed: u64,
    pub deaths: u64,
    pub recovered: u64,
}

impl CaseRow {
    pub fn get(&self, field: Field) -> u64 {
        match field {
            Field::Confirmed => self.confirmed,
            Field::Deaths => self.deaths,
            Field::Recovered => self.recovered,
        }
    }
}

/// Cleaned rows, sorted by (country, date), unique per (country, date).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CaseTable {
    rows: Vec<CaseRow>,
}

impl CaseTable {
    /// Builds a table from arbitrary rows: sums duplicates, sorts, clamps dips.
    pub fn from_rows(rows: impl IntoIterator<Item = CaseRow>) -> Self {
        let mut grouped: BTreeMap<(String, NaiveDate), [u64; 3]> = BTreeMap::new();
        for r in rows {
            let e = grouped.entry((r.country, r.date)).or_default();
            e[0] += r.confirmed;
            e[1] += r.deaths;
            e[2] += r.recovered;
        }
        let mut out: Vec<CaseRow> = Vec::with_capacity(grouped.len());
        let mut running = [0u64; 3];
        for ((country, date), counts) in grouped {
            if out.last().is_none_or(|p| p.country != country) {
                running = [0; 3];
            }
            for (m, c) in running.iter_mut().zip(counts) {
                *m = (*m).max(c);
            }
            out.push(CaseRow {
                date,
                country,
                confirmed: running[0],
                deaths: running[1],
                recovered: running[2],
            });
        }
        Self { rows: out }
    }

    pub fn rows(&self) -> &[CaseRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn countries(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.rows.iter().map(|r| r.country.as_str()).collect();
        v.dedup();
        v
    }

    pub fn country_rows(&self, country: &str) -> &[CaseRow] {
        let lo = self.rows.partition_point(|r| r.country.as_str() < country);
        let hi = self.rows.partition_point(|r| r.country.as_str() <= country);
        &self.rows[lo..hi]
    }
}

/// Cumulative counts of one field for one country on consecutive days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub country: String,
    pub field: Field,
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Day-over-day increments; the first day's increment is its own value.
    /// Negative increments are clamped to 0.
    pub fn daily_increments(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.values
            .iter()
            .map(|&v| {
                let d = (v - prev).max(0.0);
                prev = prev.max(v);
                d
            })
            .collect()
    }
}

/// Log cumulative counts against time normalized to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionSeries {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl RegressionSeries {
    /// Builds a series from raw `(t, y)` pairs, e.g. synthetic data.
    pub fn from_parts(t: Vec<f64>, y: Vec<f64>, start: NaiveDate, end: NaiveDate) -> Self {
        assert_eq!(t.len(), y.len(), "t and y must have equal length");
        Self { t, y, start, end }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn span_days(&self) -> i64 {
        (self.end - self.start).num_days()
    }

    /// Calendar day for a normalized time, rounded to the nearest day.
    pub fn date_at(&self, t: f64) -> NaiveDate {
        let offset = (t.clamp(0.0, 1.0) * self.span_days() as f64).round() as i64;
        self.start + chrono::Duration::days(offset)
    }
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(s, "%m/%d/%y"))
        .or_else(|_| NaiveDate::parse_from_str(s, "%m/%d/%Y"))
        .ok()
}

fn parse_count(s: &str) -> Option<u64> {
    let s = s.trim();
    if s.is_empty() {
        return Some(0);
    }
    if let Ok(v) = s.parse::<u64>() {
        return Some(v);
    }
    // some exports write counts as "548.0"
    let f: f64 = s.parse().ok()?;
    (f >= 0.0 && f.fract() == 0.0 && f <= u64::MAX as f64).then_some(f as u64)
}

/// Parses a case CSV. Empty count cells read as 0.
pub fn parse_case_csv<R: Read>(raw: R) -> Result<CaseTable, DataError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(raw);
    let headers = reader
        .headers()
        .map_err(|e| DataError::MalformedCsv { row: 0, message: e.to_string() })?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim().trim_start_matches('\u{feff}') == name)
            .ok_or_else(|| DataError::MalformedCsv {
                row: 0,
                message: format!("missing required column {name:?}"),
            })
    };
    let idx = [
        col("Date")?,
        col("Country/Region")?,
        col("Confirmed")?,
        col("Deaths")?,
        col("Recovered")?,
    ];

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| DataError::MalformedCsv { row, message: e.to_string() })?;
        let cell = |k: usize| record.get(idx[k]).unwrap_or("");
        let date = parse_date(cell(0)).ok_or_else(|| DataError::MalformedCsv {
            row,
            message: format!("unparseable date {:?}", cell(0)),
        })?;
        let country = cell(1).trim().to_string();
        if country.is_empty() {
            return Err(DataError::MalformedCsv { row, message: "empty country".into() });
        }
        let mut counts = [0u64; 3];
        for (k, c) in counts.iter_mut().enumerate() {
            *c = parse_count(cell(k + 2)).ok_or_else(|| DataError::MalformedCsv {
                row,
                message: format!("unparseable number {:?}", cell(k + 2)),
            })?;
        }
        rows.push(CaseRow {
            date,
            country,
            confirmed: counts[0],
            deaths: counts[1],
            recovered: counts[2],
        });
    }
    Ok(CaseTable::from_rows(rows))
}

/// Writes the table in the same layout `parse_case_csv` reads, with ISO dates.
pub fn write_case_csv<W: Write>(table: &CaseTable, out: W) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| DataError::Io(e.to_string());
    w.write_record(["Date", "Country/Region", "Confirmed", "Deaths", "Recovered"]).map_err(io)?;
    for r in table.rows() {
        w.write_record([
            r.date.format("%Y-%m-%d").to_string(),
            r.country.clone(),
            r.confirmed.to_string(),
            r.deaths.to_string(),
            r.recovered.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| DataError::Io(e.to_string()))
}

/// Cleaned cumulative counts for `country` on every day of `[start, end]`
/// that the table covers. Missing days are forward-filled.
pub fn select_series(
    table: &CaseTable,
    country: &str,
    range: (NaiveDate, NaiveDate),
    field: Field,
) -> Result<TimeSeries, DataError> {
    let rows = table.country_rows(country);
    if rows.is_empty() {
        return Err(DataError::UnknownCountry(country.to_string()));
    }
    let (start, end) = range;
    let empty = || DataError::EmptyWindow { country: country.to_string(), start, end };
    let first = start.max(rows[0].date);
    let last = end.min(rows[rows.len() - 1].date);
    if first > last {
        return Err(empty());
    }

    let mut dates = Vec::new();
    let mut values = Vec::new();
    let mut k = rows.partition_point(|r| r.date <= first).saturating_sub(1);
    let mut day = first;
    while day <= last {
        while k + 1 < rows.len() && rows[k + 1].date <= day {
            k += 1;
        }
        dates.push(day);
        values.push(rows[k].get(field) as f64);
        day = day.succ_opt().ok_or_else(empty)?;
    }
    Ok(TimeSeries { country: country.to_string(), field, dates, values })
}

/// `ln` of the cumulative counts, requiring at least [`MIN_REGRESSION_POINTS`].
pub fn to_log_cumulative(series: &TimeSeries) -> Result<RegressionSeries, DataError> {
    to_log_cumulative_min(series, MIN_REGRESSION_POINTS)
}

/// Days with a count below 1 are dropped; the first and last kept days map to
/// `t = 0` and `t = 1`, intermediate days by calendar offset.
pub fn to_log_cumulative_min(
    series: &TimeSeries,
    min_points: usize,
) -> Result<RegressionSeries, DataError> {
    let kept: Vec<(NaiveDate, f64)> = series
        .dates
        .iter()
        .zip(&series.values)
        .filter(|(_, v)| **v >= 1.0)
        .map(|(d, v)| (*d, *v))
        .collect();
    let need = min_points.max(2);
    if kept.len() < need {
        return Err(DataError::TooFewPoints { have: kept.len(), need });
    }
    let start = kept[0].0;
    let end = kept[kept.len() - 1].0;
    let span = (end - start).num_days() as f64;
    let t = kept.iter().map(|(d, _)| (*d - start).num_days() as f64 / span).collect();
    let y = kept.iter().map(|(_, v)| v.ln()).collect();
    Ok(RegressionSeries { t, y, start, end })
}
