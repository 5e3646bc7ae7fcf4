//! Self-describing result files.
//!
//! CSV: one file per table, first line `# config_sha256=<hex>`, second line
//! `# units: col=unit,...`, then the header row. JSON: one document per
//! command holding every table with its column units.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use dmcv::calibration::{write_trace, PulseTrainSpec, Trace};
use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;

use crate::config::OutputFormat;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(v) => Some(*v as f64),
            Cell::Float(v) => Some(*v),
            Cell::Text(_) => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Float(v) => write!(f, "{v}"),
            Cell::Text(s) => write!(f, "{s}"),
        }
    }
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Cell::Int(v) => s.serialize_i64(*v),
            Cell::Float(v) if v.is_finite() => s.serialize_f64(*v),
            Cell::Float(v) => s.serialize_str(&v.to_string()),
            Cell::Text(t) => s.serialize_str(t),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
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

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Column {
    pub name: String,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    #[serde(skip)]
    pub name: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    /// `columns` as `(name, unit)` pairs.
    pub fn new(name: &str, columns: &[(&str, &str)]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns
                .iter()
                .map(|(n, u)| Column {
                    name: n.to_string(),
                    unit: u.to_string(),
                })
                .collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width in {}", self.name);
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Numeric column by name.
    pub fn column(&self, name: &str) -> Vec<f64> {
        let i = self.column_index(name).unwrap_or_else(|| panic!("no column {name} in {}", self.name));
        self.rows.iter().map(|r| r[i].as_f64().unwrap_or(f64::NAN)).collect()
    }

    /// A `key,value,unit` table.
    pub fn summary(name: &str) -> Self {
        Self::new(name, &[("key", "-"), ("value", "-"), ("unit", "-")])
    }

    pub fn entry(&mut self, key: &str, value: impl Into<Cell>, unit: &str) {
        self.push(vec![key.into(), value.into(), unit.into()]);
    }

    /// Value of a `key,value,unit` row.
    pub fn get(&self, key: &str) -> Option<&Cell> {
        self.rows.iter().find(|r| r[0].as_str() == Some(key)).map(|r| &r[1])
    }

    fn write_csv<W: Write>(&self, mut out: W, config_hash: &str) -> std::io::Result<()> {
        writeln!(out, "# config_sha256={config_hash}")?;
        let units: Vec<String> = self.columns.iter().map(|c| format!("{}={}", c.name, c.unit)).collect();
        writeln!(out, "# units: {}", units.join(","))?;
        let names: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        writeln!(out, "{}", names.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::to_string).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        out.flush()
    }
}

struct Tables<'a>(&'a [Table]);

impl Serialize for Tables<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for t in self.0 {
            map.serialize_entry(&t.name, t)?;
        }
        map.end()
    }
}

/// A binary artefact written next to the tables.
#[derive(Debug, Clone)]
pub enum Attachment {
    Trace { name: String, trace: Trace, spec: PulseTrainSpec },
}

/// Everything one command produces.
#[derive(Debug, Clone)]
pub struct Report {
    pub command: String,
    pub config_sha256: String,
    pub tables: Vec<Table>,
    pub attachments: Vec<Attachment>,
}

impl Report {
    pub fn new(command: &str, config_sha256: String) -> Self {
        Self {
            command: command.to_string(),
            config_sha256,
            tables: Vec::new(),
            attachments: Vec::new(),
        }
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Writes all outputs into `dir` and returns the paths written.
    pub fn write(&self, dir: &Path, format: OutputFormat) -> std::io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        match format {
            OutputFormat::Csv => {
                for t in &self.tables {
                    let path = dir.join(format!("{}.csv", t.name));
                    t.write_csv(BufWriter::new(fs::File::create(&path)?), &self.config_sha256)?;
                    written.push(path);
                }
            }
            OutputFormat::Json => {
                #[derive(Serialize)]
                struct Doc<'a> {
                    command: &'a str,
                    config_sha256: &'a str,
                    tables: Tables<'a>,
                }
                let doc = Doc {
                    command: &self.command,
                    config_sha256: &self.config_sha256,
                    tables: Tables(&self.tables),
                };
                let path = dir.join(format!("{}.json", self.command));
                let mut text = serde_json::to_string_pretty(&doc).map_err(std::io::Error::other)?;
                text.push('\n');
                fs::write(&path, text)?;
                written.push(path);
            }
        }
        for a in &self.attachments {
            match a {
                Attachment::Trace { name, trace, spec } => {
                    let base = dir.join(name);
                    write_trace(&base, trace, spec).map_err(std::io::Error::other)?;
                    written.push(base.with_extension("f32"));
                    written.push(base.with_extension("json"));
                }
            }
        }
        Ok(written)
    }
}
