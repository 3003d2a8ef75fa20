//! Tabular reports and their CSV, JSON and plot-data encodings.
//!
//! Numbers are written with 17 significant digits in CSV and in shortest
//! round-trip form in JSON, so every value re-parses to the same `f64`.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;
use serde_json::{Map, Value};

/// Version of the report layout; bump on any column or key change.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Self::Num(x) => format_f64(*x),
            Self::Int(n) => n.to_string(),
            Self::Text(s) => s.clone(),
            Self::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Self::Num(x) => serde_json::Number::from_f64(*x).map_or(Value::Null, Value::Number),
            Self::Int(n) => Value::from(*n),
            Self::Text(s) => Value::from(s.clone()),
            Self::Empty => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Self::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Self::Int(n as u64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Self::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Self::Text(s)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Self::Empty, Self::Num)
    }
}

/// `PASS` or `FAIL`.
pub fn verdict(pass: bool) -> Cell {
    Cell::Text(if pass { "PASS" } else { "FAIL" }.into())
}

/// Scientific notation with 17 significant digits.
pub fn format_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

/// Output of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: String,
    /// Echo of the effective configuration.
    pub config: BTreeMap<String, Value>,
    pub table: Table,
    /// Command-specific values that do not fit the table.
    pub extras: BTreeMap<String, Value>,
    /// Named two-column series for `--plot-data`.
    pub series: Vec<(String, Vec<(f64, f64)>)>,
    pub all_pass: bool,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    schema_version: u32,
    command: &'a str,
    all_pass: bool,
    config: &'a BTreeMap<String, Value>,
    columns: &'a [String],
    rows: Vec<Map<String, Value>>,
    extras: &'a BTreeMap<String, Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

pub fn emit_csv(report: &Report) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    w.write_record(&report.table.columns).expect("in-memory write");
    for row in &report.table.rows {
        w.write_record(row.iter().map(Cell::csv)).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn emit_json(report: &Report) -> Vec<u8> {
    let rows = report
        .table
        .rows
        .iter()
        .map(|row| report.table.columns.iter().cloned().zip(row.iter().map(Cell::json)).collect())
        .collect();
    let doc = JsonReport {
        schema_version: SCHEMA_VERSION,
        command: &report.command,
        all_pass: report.all_pass,
        config: &report.config,
        columns: &report.table.columns,
        rows,
        extras: &report.extras,
    };
    let mut out = serde_json::to_vec_pretty(&doc).expect("report is serializable");
    out.push(b'\n');
    out
}

pub fn emit_report(report: &Report, format: Format) -> Vec<u8> {
    match format {
        Format::Csv => emit_csv(report),
        Format::Json => emit_json(report),
    }
}

/// Whitespace-separated `x y` lines.
pub fn emit_plot_series(points: &[(f64, f64)]) -> Vec<u8> {
    let mut out = Vec::new();
    for &(x, y) in points {
        writeln!(out, "{} {}", format_f64(x), format_f64(y)).expect("in-memory write");
    }
    out
}

/// Parse a CSV report back into its header and string cells.
pub fn parse_csv(bytes: &[u8]) -> csv::Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::ReaderBuilder::new().from_reader(bytes);
    let header = r.headers()?.iter().map(str::to_string).collect();
    let rows = r.records().map(|rec| rec.map(|r| r.iter().map(str::to_string).collect())).collect::<csv::Result<_>>()?;
    Ok((header, rows))
}
