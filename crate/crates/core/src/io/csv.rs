//! CSV codecs for event streams, price paths, state sequences and samples.
//!
//! Doubles are written with Rust's shortest round-trip formatting, so
//! reading a file back reproduces every value bit for bit.

use std::path::Path;

use crate::error::{LabError, Result};
use crate::hawkes::EventStream;
use crate::price::PricePath;

use super::write_atomic;

fn render(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| LabError::Io(e.to_string()))
}

fn parse_f64(field: &str, line: u64, col: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| LabError::Validation(format!("line {line}: column '{col}' is not a number: '{field}'")))
}

/// Column table read from a headered CSV.
struct Table {
    header: Vec<String>,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Table {
    fn read(path: &Path) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
        let header = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            rows.push((line, rec));
        }
        Ok(Table { header, rows })
    }

    fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.column(name)
            .ok_or_else(|| LabError::Validation(format!("CSV has no '{name}' column (header: {})", self.header.join(","))))
    }

    fn floats(&self, col: usize) -> Result<Vec<f64>> {
        let name = &self.header[col];
        self.rows.iter().map(|(line, r)| parse_f64(&r[col], *line, name)).collect()
    }
}

/// `time,regime` with 1-based regimes, blank when the stream has none.
pub fn events_to_csv(events: &EventStream) -> Result<Vec<u8>> {
    let rows = events.times.iter().enumerate().map(|(i, t)| {
        let regime = events.regimes.as_ref().map_or(String::new(), |r| (r[i] + 1).to_string());
        vec![t.to_string(), regime]
    });
    render(&["time", "regime"], rows)
}

pub fn write_events(path: &Path, events: &EventStream) -> Result<()> {
    write_atomic(path, &events_to_csv(events)?)
}

/// Event times (and regimes when every row carries one) from a CSV with a
/// `time` column; the horizon is supplied by the caller.
pub fn read_events(path: &Path, horizon: f64) -> Result<EventStream> {
    let table = Table::read(path)?;
    let times = table.floats(table.require("time")?)?;
    let regimes = match table.column("regime") {
        None => None,
        Some(c) => {
            let raw: Vec<&str> = table.rows.iter().map(|(_, r)| &r[c]).collect();
            if raw.iter().all(|s| s.is_empty()) {
                None
            } else {
                let parsed = table
                    .rows
                    .iter()
                    .map(|(line, r)| match r[c].parse::<usize>() {
                        Ok(k) if k >= 1 => Ok(k - 1),
                        _ => Err(LabError::Validation(format!("line {line}: regime must be a 1-based index, got '{}'", &r[c]))),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Some(parsed)
            }
        }
    };
    let stream = EventStream { times, horizon, regimes };
    stream.validate()?;
    Ok(stream)
}

/// `time,increment,price`, one row per event.
pub fn price_path_to_csv(path: &PricePath) -> Result<Vec<u8>> {
    let rows = path
        .events
        .times
        .iter()
        .zip(&path.increments)
        .zip(&path.prices)
        .map(|((t, d), s)| vec![t.to_string(), d.to_string(), s.to_string()]);
    render(&["time", "increment", "price"], rows)
}

pub fn write_price_path(out: &Path, path: &PricePath) -> Result<()> {
    write_atomic(out, &price_path_to_csv(path)?)
}

/// The `price` column of a CSV.
pub fn read_prices(path: &Path) -> Result<Vec<f64>> {
    let table = Table::read(path)?;
    table.floats(table.require("price")?)
}

/// Single-column `state` CSV with 1-based states.
pub fn states_to_csv(states: &[usize]) -> Result<Vec<u8>> {
    render(&["state"], states.iter().map(|s| vec![(s + 1).to_string()]))
}

/// 0-based states from a single-column `state` CSV.
pub fn read_states(path: &Path) -> Result<Vec<usize>> {
    let table = Table::read(path)?;
    let c = table.require("state")?;
    table
        .rows
        .iter()
        .map(|(line, r)| match r[c].parse::<usize>() {
            Ok(k) if k >= 1 => Ok(k - 1),
            _ => Err(LabError::Validation(format!("line {line}: state must be a 1-based index, got '{}'", &r[c]))),
        })
        .collect()
}

/// `index,<name>` rows for per-path samples or residuals.
pub fn samples_to_csv(name: &str, values: &[f64]) -> Result<Vec<u8>> {
    render(&["index", name], values.iter().enumerate().map(|(i, v)| vec![i.to_string(), v.to_string()]))
}

/// One header row and one value row.
pub fn row_to_csv(fields: &[(&str, String)]) -> Result<Vec<u8>> {
    let header: Vec<&str> = fields.iter().map(|(k, _)| *k).collect();
    render(&header, std::iter::once(fields.iter().map(|(_, v)| v.clone()).collect()))
}
