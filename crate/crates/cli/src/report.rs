//! CSV/JSONL emission with exact rationals and float companions.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use aixi_core::rational::{self, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Jsonl,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Jsonl => "jsonl",
        }
    }
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "jsonl" => Ok(Format::Jsonl),
            _ => Err(format!("unknown format {s:?} (expected csv or jsonl)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Text(String),
    Bool(bool),
    Float(f64),
    /// Written as `p/q` followed by a float column.
    Rat(Rational),
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u16> for Cell {
    fn from(v: u16) -> Self {
        Cell::Int(i64::from(v))
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<Rational> for Cell {
    fn from(v: Rational) -> Self {
        Cell::Rat(v)
    }
}

impl From<&Rational> for Cell {
    fn from(v: &Rational) -> Self {
        Cell::Rat(v.clone())
    }
}

/// A table whose rational columns are declared up front, so even an empty
/// report gets the full header.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    columns: Vec<(String, bool)>,
    rows: Vec<Vec<Cell>>,
}

impl Report {
    /// Column names ending in `/` hold rationals, e.g. `"value/"`.
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns
                .iter()
                .map(|c| match c.strip_suffix('/') {
                    Some(name) => (name.to_string(), true),
                    None => (c.to_string(), false),
                })
                .collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn header(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, rational) in &self.columns {
            out.push(name.clone());
            if *rational {
                out.push(format!("{name}_f64"));
            }
        }
        out
    }

    pub fn to_csv(&self) -> io::Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(self.header())?;
        for row in &self.rows {
            let mut fields = Vec::new();
            for cell in row {
                match cell {
                    Cell::Int(v) => fields.push(v.to_string()),
                    Cell::Text(s) => fields.push(s.clone()),
                    Cell::Bool(b) => fields.push(b.to_string()),
                    Cell::Float(f) => fields.push(f.to_string()),
                    Cell::Rat(r) => {
                        fields.push(rational::exact(r));
                        fields.push(rational::to_f64(r).to_string());
                    }
                }
            }
            w.write_record(&fields)?;
        }
        w.into_inner().map_err(|e| e.into_error())
    }

    /// One JSON object per row with keys in column order.
    pub fn to_jsonl(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for row in &self.rows {
            let mut fields = Vec::new();
            for ((name, _), cell) in self.columns.iter().zip(row) {
                let key = serde_json::to_string(name).expect("string");
                let value = match cell {
                    Cell::Int(v) => serde_json::json!(v),
                    Cell::Text(s) => serde_json::json!(s),
                    Cell::Bool(b) => serde_json::json!(b),
                    Cell::Float(f) => serde_json::json!(f),
                    Cell::Rat(r) => {
                        let f = serde_json::to_string(&format!("{name}_f64")).expect("string");
                        fields.push(format!("{key}:{}", serde_json::json!(rational::exact(r))));
                        fields.push(format!("{f}:{}", serde_json::json!(rational::to_f64(r))));
                        continue;
                    }
                };
                fields.push(format!("{key}:{value}"));
            }
            out.extend_from_slice(format!("{{{}}}\n", fields.join(",")).as_bytes());
        }
        out
    }

    pub fn render(&self, format: Format) -> io::Result<Vec<u8>> {
        match format {
            Format::Csv => self.to_csv(),
            Format::Jsonl => Ok(self.to_jsonl()),
        }
    }
}

/// Writes `report` to `path`. Field order is the column order; every line
/// ends in a newline.
pub fn emit_report(report: &Report, path: &Path, format: Format) -> io::Result<()> {
    let bytes = report.render(format)?;
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    f.flush()
}
