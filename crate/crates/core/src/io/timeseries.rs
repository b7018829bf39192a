//! Time-series CSV files and resampling onto the simulation increment.
//!
//! A file has a timestamp column whose header names its unit, then one
//! column per series:
//!
//! ```text
//! timestamp[h],residential,wind
//! 0,0.61,0.12
//! 1,0.58,0.30
//! ```
//!
//! Each sample stands for the interval up to the next timestamp. Load and
//! production values are per-unit multipliers of peak demand and rated
//! output; cost values are in currency per MWh.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use thiserror::Error;

use crate::indices::CostTable;
use crate::sim::Profiles;
use crate::time::{Duration, TimeUnit};

#[derive(Debug, Error)]
pub enum TimeSeriesError {
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("header must start with `timestamp[<unit>]`, found `{0}`")]
    BadHeader(String),
    #[error("row {row}: {message}")]
    BadRow { row: usize, message: String },
    #[error("timestamps must be strictly increasing and uniformly spaced (row {0})")]
    Spacing(usize),
    #[error("series is empty")]
    Empty,
    #[error("target increment {target} exceeds the series span {span}")]
    TargetTooLarge { target: Duration, span: Duration },
    #[error("increment must be positive")]
    ZeroIncrement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesKind {
    Load,
    Production,
    Cost,
}

/// Uniformly spaced samples.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub kind: SeriesKind,
    pub start: Duration,
    pub step: Duration,
    pub values: Vec<f64>,
}

impl TimeSeries {
    /// Time covered by the samples, counting the last one's interval.
    pub fn span(&self) -> Duration {
        self.step * self.values.len() as i64
    }

    /// Sum of value times interval length, in value-hours.
    pub fn energy(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.step.as_hours()
    }
}

/// Resamples onto `target` spacing. A finer target interpolates linearly
/// between samples and keeps both end values; a coarser one averages each
/// target interval over the samples it covers, so the energy is unchanged.
pub fn interpolate(series: &TimeSeries, target: Duration) -> Result<TimeSeries, TimeSeriesError> {
    if series.values.is_empty() {
        return Err(TimeSeriesError::Empty);
    }
    if target.millis() <= 0 || series.step.millis() <= 0 {
        return Err(TimeSeriesError::ZeroIncrement);
    }
    if target > series.span() {
        return Err(TimeSeriesError::TargetTooLarge {
            target,
            span: series.span(),
        });
    }
    let s = series.step.millis();
    let t = target.millis();
    let v = &series.values;
    let values = if t == s {
        v.clone()
    } else if t < s {
        let last = s * (v.len() as i64 - 1);
        (0..=last / t)
            .map(|k| {
                let at = k * t;
                let i = (at / s) as usize;
                let frac = (at - i as i64 * s) as f64 / s as f64;
                if frac == 0.0 {
                    v[i]
                } else {
                    v[i] + (v[i + 1] - v[i]) * frac
                }
            })
            .collect()
    } else {
        let end = series.span().millis();
        let count = (end + t - 1) / t;
        (0..count)
            .map(|k| {
                let lo = k * t;
                let hi = ((k + 1) * t).min(end);
                let mut acc = 0.0;
                for i in (lo / s)..((hi + s - 1) / s) {
                    let overlap = (hi.min((i + 1) * s) - lo.max(i * s)) as f64;
                    acc += v[i as usize] * overlap;
                }
                acc / (hi - lo) as f64
            })
            .collect()
    };
    let mut out = TimeSeries {
        kind: series.kind,
        start: series.start,
        step: target,
        values,
    };
    if t > s {
        // The last interval can be partial; its mean still holds for the
        // whole target step, so rescale it to keep the energy exact.
        let end = series.span().millis();
        let covered = end - t * (out.values.len() as i64 - 1);
        if covered < t {
            let last = out.values.len() - 1;
            out.values[last] *= covered as f64 / t as f64;
        }
    }
    Ok(out)
}

/// Named columns read from one CSV file, all on the same time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTable {
    pub kind: SeriesKind,
    pub start: Duration,
    pub step: Duration,
    pub columns: BTreeMap<String, Vec<f64>>,
}

impl SeriesTable {
    pub fn column(&self, name: &str) -> Option<TimeSeries> {
        self.columns.get(name).map(|values| TimeSeries {
            kind: self.kind,
            start: self.start,
            step: self.step,
            values: values.clone(),
        })
    }

    /// Resamples every column onto `increment` and adds them to `profiles`.
    pub fn add_to_profiles(&self, profiles: &mut Profiles, increment: Duration) -> Result<(), TimeSeriesError> {
        for name in self.columns.keys() {
            let series = self.column(name).expect("known column");
            profiles.insert(name.clone(), interpolate(&series, increment)?.values);
        }
        Ok(())
    }
}

fn parse_unit(header: &str) -> Option<TimeUnit> {
    let inner = header.trim().strip_prefix("timestamp[")?.strip_suffix(']')?;
    inner.parse().ok()
}

pub fn parse_series_csv(reader: impl Read, kind: SeriesKind) -> Result<SeriesTable, TimeSeriesError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let first = headers.get(0).unwrap_or("");
    let unit = parse_unit(first).ok_or_else(|| TimeSeriesError::BadHeader(first.to_string()))?;
    let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut times = Vec::new();
    let mut columns = vec![Vec::new(); names.len()];
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 2;
        let bad = |message: String| TimeSeriesError::BadRow { row, message };
        if record.len() != names.len() + 1 {
            return Err(bad(format!("expected {} fields, found {}", names.len() + 1, record.len())));
        }
        let t: f64 = record[0]
            .parse()
            .map_err(|_| bad(format!("bad timestamp `{}`", &record[0])))?;
        if !t.is_finite() || t < 0.0 {
            return Err(bad(format!("bad timestamp `{}`", &record[0])));
        }
        times.push(Duration::from_unit(t, unit));
        for (c, field) in record.iter().skip(1).enumerate() {
            let v: f64 = field
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| bad(format!("missing or bad value in column `{}`", names[c])))?;
            columns[c].push(v);
        }
    }
    if times.is_empty() {
        return Err(TimeSeriesError::Empty);
    }
    let step = if times.len() > 1 { times[1] - times[0] } else { Duration::hours(1.0) };
    if step.millis() <= 0 {
        return Err(TimeSeriesError::Spacing(3));
    }
    for (i, w) in times.windows(2).enumerate() {
        if w[1] - w[0] != step {
            return Err(TimeSeriesError::Spacing(i + 3));
        }
    }
    Ok(SeriesTable {
        kind,
        start: times[0],
        step,
        columns: names.into_iter().zip(columns).collect(),
    })
}

pub fn read_series_file(path: &Path, kind: SeriesKind) -> Result<SeriesTable, TimeSeriesError> {
    let file = std::fs::File::open(path).map_err(|source| TimeSeriesError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_series_csv(file, kind)
}

/// Reads `category,cost` rows.
pub fn parse_costs_csv(reader: impl Read) -> Result<CostTable, TimeSeriesError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut costs = CostTable::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let bad = |message: String| TimeSeriesError::BadRow { row: r + 2, message };
        if record.len() != 2 {
            return Err(bad("expected `category,cost`".into()));
        }
        let cost: f64 = record[1]
            .parse()
            .ok()
            .filter(|c: &f64| c.is_finite() && *c >= 0.0)
            .ok_or_else(|| bad(format!("bad cost `{}`", &record[1])))?;
        costs.insert(record[0].to_string(), cost);
    }
    Ok(costs)
}

pub fn read_costs_file(path: &Path) -> Result<CostTable, TimeSeriesError> {
    let file = std::fs::File::open(path).map_err(|source| TimeSeriesError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_costs_csv(file)
}

pub fn write_series_csv(table: &SeriesTable, unit: TimeUnit) -> Result<String, TimeSeriesError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![format!("timestamp[{}]", unit.symbol())];
    header.extend(table.columns.keys().cloned());
    w.write_record(&header)?;
    let rows = table.columns.values().map(Vec::len).max().unwrap_or(0);
    for i in 0..rows {
        let t = (table.start + table.step * i as i64).to_unit(unit);
        let mut record = vec![t.to_string()];
        record.extend(table.columns.values().map(|c| c[i].to_string()));
        w.write_record(&record)?;
    }
    let bytes = w.into_inner().map_err(|e| TimeSeriesError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
