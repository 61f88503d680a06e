use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Map, Value as Json};

/// One output cell.
#[derive(Debug, Clone)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
    Bool(bool),
}

impl Cell {
    fn to_csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format!("{v:.16e}"),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }

    fn to_json(&self) -> Json {
        match self {
            Cell::Int(v) => json!(v),
            Cell::Float(v) => serde_json::Number::from_f64(*v).map_or(Json::Null, Json::Number),
            Cell::Text(s) => json!(s),
            Cell::Bool(b) => json!(b),
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
        Cell::Int(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_owned())
    }
}

#[macro_export]
macro_rules! row {
    ($($v:expr),* $(,)?) => { vec![$($crate::output::Cell::from($v)),*] };
}

/// How rows are rendered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    /// `column=value` lines, for single-row reports on a terminal.
    KeyValue,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Parameters and provenance of one run, written next to its output file.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub params: Json,
    pub seed: Option<u64>,
    pub version: String,
    pub timestamp: u64,
    pub argv: Vec<String>,
}

impl RunManifest {
    pub fn new(subcommand: &str, params: Json, seed: Option<u64>) -> Self {
        Self {
            subcommand: subcommand.to_owned(),
            params,
            seed,
            version: env!("CARGO_PKG_VERSION").to_owned(),
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            argv: std::env::args().collect(),
        }
    }
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// Streams rows to CSV, or collects them for JSON, then prints the
/// PASS/FAIL summary lines.
pub struct Report {
    columns: Vec<&'static str>,
    format: Format,
    out: Option<PathBuf>,
    csv: Option<csv::Writer<Box<dyn Write>>>,
    rows: Vec<Json>,
    checks: Vec<Check>,
    manifest: RunManifest,
}

impl Report {
    pub fn new(columns: &[&'static str], format: Format, out: Option<&Path>, manifest: RunManifest) -> Result<Self> {
        let format = match (format, out) {
            (Format::KeyValue, Some(_)) => Format::Csv,
            (f, _) => f,
        };
        let csv = if format == Format::Csv {
            let sink: Box<dyn Write> = match out {
                Some(p) => Box::new(BufWriter::new(
                    File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
                )),
                None => Box::new(BufWriter::new(io::stdout())),
            };
            let mut w = csv::Writer::from_writer(sink);
            w.write_record(columns)?;
            Some(w)
        } else {
            None
        };
        Ok(Self {
            columns: columns.to_vec(),
            format,
            out: out.map(Path::to_path_buf),
            csv,
            rows: Vec::new(),
            checks: Vec::new(),
            manifest,
        })
    }

    pub fn row(&mut self, cells: Vec<Cell>) -> Result<()> {
        debug_assert_eq!(cells.len(), self.columns.len());
        match &mut self.csv {
            Some(w) => w.write_record(cells.iter().map(Cell::to_csv))?,
            None => {
                let obj: Map<String, Json> =
                    self.columns.iter().zip(&cells).map(|(c, v)| (c.to_string(), v.to_json())).collect();
                self.rows.push(Json::Object(obj));
            }
        }
        Ok(())
    }

    pub fn check(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), pass, detail: detail.into() });
    }

    /// Flush everything; returns whether every check passed.
    pub fn finish(mut self) -> Result<bool> {
        if let Some(mut w) = self.csv.take() {
            w.flush()?;
        }
        let mut stdout = io::stdout().lock();
        match self.format {
            Format::Csv => {}
            Format::Json => {
                let doc = json!({
                    "manifest": self.manifest,
                    "columns": self.columns,
                    "rows": self.rows,
                    "checks": self.checks,
                });
                match &self.out {
                    Some(p) => {
                        let f = File::create(p).with_context(|| format!("cannot create {}", p.display()))?;
                        serde_json::to_writer_pretty(BufWriter::new(f), &doc)?;
                    }
                    None => {
                        serde_json::to_writer_pretty(&mut stdout, &doc)?;
                        writeln!(stdout)?;
                    }
                }
            }
            Format::KeyValue => {
                for row in &self.rows {
                    for c in &self.columns {
                        writeln!(stdout, "{c}={}", row[*c])?;
                    }
                }
            }
        }
        if let Some(p) = &self.out {
            let mp = manifest_path(p);
            let f = File::create(&mp).with_context(|| format!("cannot create {}", mp.display()))?;
            serde_json::to_writer_pretty(BufWriter::new(f), &self.manifest)?;
        }
        // Summaries must not interleave with data written to stdout.
        let data_on_stdout = self.out.is_none();
        let mut stderr = io::stderr().lock();
        for c in &self.checks {
            let line = format!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            if data_on_stdout {
                writeln!(stderr, "{line}")?;
            } else {
                writeln!(stdout, "{line}")?;
            }
        }
        Ok(self.checks.iter().all(|c| c.pass))
    }
}
