use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::RunConfig;
use crate::error::{Error, Result};

/// Bumped whenever a CSV column set or the manifest layout changes.
pub const SCHEMA_VERSION: u32 = 1;

/// A CSV table held as preformatted cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(file: impl Into<String>, header: &[&str]) -> Self {
        Table {
            file: file.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.into_inner().map_err(|e| Error::io("<csv>", e.into_error()))
    }
}

/// Shortest round-trip decimal form; stable across runs.
pub fn num(v: f64) -> String {
    v.to_string()
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub schema_version: u32,
    pub command: &'a str,
    pub config: Option<&'a RunConfig>,
    pub files: Vec<String>,
    pub summary: &'a serde_json::Value,
    /// Wall-clock seconds per named phase. The only non-reproducible field.
    pub timings_secs: &'a [(String, f64)],
}

/// Everything one CLI command emits.
#[derive(Debug, Clone)]
pub struct Report {
    pub command: String,
    pub tables: Vec<Table>,
    pub summary: serde_json::Value,
    pub timings: Vec<(String, f64)>,
}

/// Writes each table as CSV plus `manifest.json` into `dir`; returns the
/// written paths.
pub fn write_reports(report: &Report, config: Option<&RunConfig>, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for table in &report.tables {
        let path = dir.join(&table.file);
        std::fs::write(&path, table.to_csv()?).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    let manifest = Manifest {
        tool: "gbsde",
        version: env!("CARGO_PKG_VERSION"),
        schema_version: SCHEMA_VERSION,
        command: &report.command,
        config,
        files: report.tables.iter().map(|t| t.file.clone()).collect(),
        summary: &report.summary,
        timings_secs: &report.timings,
    };
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}
