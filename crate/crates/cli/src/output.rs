//! CSV and JSON writers that stamp every file with its provenance.
//!
//! CSV files start with `#` metadata lines followed by exactly one header
//! row. Reals are written with 17 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

/// Build version, `<crate version>+<git describe>` when available.
pub fn version() -> &'static str {
    env!("OSIRIS_VERSION")
}

/// Provenance written at the top of every output file.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub version: String,
    pub command: String,
    pub environment: String,
    pub seed: u64,
    /// Exact value of the evaluation policy used as ground truth.
    pub truth: f64,
    /// Every visit to a state enters the relevance test.
    pub visits: &'static str,
    pub config: ExperimentConfig,
}

impl Metadata {
    pub fn new(command: &str, environment: &str, truth: f64, config: &ExperimentConfig) -> Self {
        Self {
            version: version().to_string(),
            command: command.to_string(),
            environment: environment.to_string(),
            seed: config.seed,
            truth,
            visits: "all",
            config: config.clone(),
        }
    }

    fn csv_preamble(&self) -> String {
        let config = serde_json::to_string(&self.config).expect("config serializes");
        let mut out = String::new();
        let _ = writeln!(out, "# version: {}", self.version);
        let _ = writeln!(out, "# command: {}", self.command);
        let _ = writeln!(out, "# environment: {}", self.environment);
        let _ = writeln!(out, "# seed: {}", self.seed);
        let _ = writeln!(out, "# truth: {}", real(self.truth));
        let _ = writeln!(out, "# visits: {}", self.visits);
        let _ = writeln!(out, "# config: {config}");
        out
    }
}

/// `{:.16e}`; non-finite values are written as `nan`, `inf` or `-inf`.
pub fn real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Empty field for a missing value.
pub fn opt_real(x: Option<f64>) -> String {
    x.map(real).unwrap_or_default()
}

/// Rows of string cells under a fixed header.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self, meta: &Metadata) -> String {
        let mut out = meta.csv_preamble();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| escape(c)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

fn escape(cell: &str) -> String {
    if cell.contains([',', '"', '\n']) {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn write_csv(path: &Path, meta: &Metadata, table: &Table) -> Result<()> {
    write(path, &table.render(meta))
}

#[derive(Serialize)]
struct Document<'a, T> {
    meta: &'a Metadata,
    results: &'a T,
}

pub fn write_json<T: Serialize>(path: &Path, meta: &Metadata, results: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(&Document { meta, results }).expect("results serialize");
    write(path, &(text + "\n"))
}
