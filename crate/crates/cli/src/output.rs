// SPDX-License-Identifier: Apache-2.0

//! Table and manifest writers.
//!
//! CSV files start with `#` comment lines (subcommand, config hash, column
//! units), then a header row, then one row per record. Numbers use `{:.16e}`
//! (17 significant digits); lines end in LF.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Column {
    pub name: &'static str,
    pub unit: &'static str,
}

pub const fn col(name: &'static str, unit: &'static str) -> Column {
    Column { name, unit }
}

#[derive(Debug, Clone)]
pub struct Table {
    /// File stem.
    pub name: &'static str,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &'static str, columns: Vec<Column>) -> Self {
        Table {
            name,
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn push_nums(&mut self, row: &[f64]) {
        self.push(row.iter().map(|&v| Cell::Num(v)).collect());
    }
}

/// Everything a subcommand produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub tables: Vec<Table>,
    /// Scalar results, written to `summary.json`.
    pub summary: Value,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn render_csv(table: &Table, subcommand: &str, config_hash: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# subcommand: {subcommand}");
    let _ = writeln!(s, "# config_sha256: {config_hash}");
    let units: Vec<String> = table
        .columns
        .iter()
        .map(|c| format!("{} [{}]", c.name, c.unit))
        .collect();
    let _ = writeln!(s, "# columns: {}", units.join(", "));
    let names: Vec<&str> = table.columns.iter().map(|c| c.name).collect();
    let _ = writeln!(s, "{}", names.join(","));
    for row in &table.rows {
        let cells: Vec<String> = row
            .iter()
            .map(|c| match c {
                Cell::Num(v) => format!("{v:.16e}"),
                Cell::Text(t) => t.clone(),
            })
            .collect();
        let _ = writeln!(s, "{}", cells.join(","));
    }
    s
}

fn render_json(table: &Table, subcommand: &str, config_hash: &str) -> Result<String, CliError> {
    let doc = json!({
        "subcommand": subcommand,
        "config_sha256": config_hash,
        "columns": table.columns,
        "rows": table.rows,
    });
    let mut s = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn write(path: &Path, contents: &str) -> Result<String, CliError> {
    fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(sha256_hex(contents.as_bytes()))
}

/// Manifest fields known before writing.
pub struct RunInfo<'a> {
    pub subcommand: &'a str,
    pub config_path: &'a Path,
    pub config_hash: &'a str,
    pub format: Format,
    pub jobs: usize,
    pub wall_time_s: f64,
}

/// Writes every table, `summary.json` and `manifest.json` into `dir`.
pub fn write_all(dir: &Path, out: &RunOutput, info: &RunInfo) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut written = Vec::new();
    let mut files = Vec::new();
    for table in &out.tables {
        let path = dir.join(format!("{}.{}", table.name, info.format.extension()));
        let text = match info.format {
            Format::Csv => render_csv(table, info.subcommand, info.config_hash),
            Format::Json => render_json(table, info.subcommand, info.config_hash)?,
        };
        let hash = write(&path, &text)?;
        files.push(json!({ "file": path.file_name().and_then(|n| n.to_str()), "sha256": hash }));
        written.push(path);
    }

    let summary = json!({
        "subcommand": info.subcommand,
        "config_sha256": info.config_hash,
        "results": out.summary,
    });
    let path = dir.join("summary.json");
    let text =
        serde_json::to_string_pretty(&summary).map_err(|e| CliError::Io(e.to_string()))? + "\n";
    let hash = write(&path, &text)?;
    files.push(json!({ "file": "summary.json", "sha256": hash }));
    written.push(path);

    let manifest = json!({
        "subcommand": info.subcommand,
        "config_path": info.config_path.display().to_string(),
        "config_sha256": info.config_hash,
        "versions": {
            "spinsqueeze-core": spinsqueeze_core::VERSION,
            "spinsqueeze-cli": env!("CARGO_PKG_VERSION"),
        },
        "format": info.format.extension(),
        "jobs": info.jobs,
        "wall_time_s": info.wall_time_s,
        "outputs": files,
    });
    let path = dir.join("manifest.json");
    let text =
        serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))? + "\n";
    write(&path, &text)?;
    written.push(path);
    Ok(written)
}
