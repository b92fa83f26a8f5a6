//! Report envelope shared by every subcommand: config, hashes of the inputs, a table and a summary.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Serialize)]
pub struct Input {
    pub name: String,
    pub sha256: String,
}

impl Input {
    /// Hash of the file bytes, named by file name only so reports do not depend on where the data live.
    pub fn file(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        Ok(Input { name, sha256: sha256_hex(&bytes) })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub wlab: &'static str,
    pub command: String,
    pub config: Value,
    pub config_hash: String,
    pub inputs: Vec<Input>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
    pub summary: Map<String, Value>,
    /// Full result structures; JSON only.
    #[serde(skip_serializing_if = "Value::is_null")]
    pub details: Value,
}

impl Report {
    pub fn new(command: &str, config: Value, columns: Vec<&'static str>) -> Self {
        let config_hash = sha256_hex(config.to_string().as_bytes());
        Report {
            wlab: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config,
            config_hash,
            inputs: Vec::new(),
            columns,
            rows: Vec::new(),
            summary: Map::new(),
            details: Value::Null,
        }
    }

    pub fn row(&mut self, values: Vec<Value>) {
        debug_assert_eq!(values.len(), self.columns.len());
        self.rows.push(values);
    }

    pub fn set(&mut self, key: &str, value: impl Serialize) {
        self.summary.insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    pub fn render(&self, format: Format) -> Result<Vec<u8>, CliError> {
        match format {
            Format::Json => {
                let mut out = serde_json::to_vec_pretty(self).map_err(|e| CliError::Output(e.to_string()))?;
                out.push(b'\n');
                Ok(out)
            }
            Format::Csv => self.render_csv(),
        }
    }

    /// `#` header lines, the table, then `#` summary lines.
    fn render_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut out = Vec::new();
        let _ = writeln!(out, "# wlab {} {}", self.wlab, self.command);
        let _ = writeln!(out, "# config_hash {}", self.config_hash);
        let _ = writeln!(out, "# config {}", self.config);
        for i in &self.inputs {
            let _ = writeln!(out, "# input {} {}", i.name, i.sha256);
        }
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| CliError::Output(e.to_string());
        w.write_record(&self.columns).map_err(err)?;
        for r in &self.rows {
            w.write_record(r.iter().map(cell_text)).map_err(err)?;
        }
        let mut out = w.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
        for (k, v) in &self.summary {
            let _ = writeln!(out, "# {k} {}", cell_text(v));
        }
        Ok(out)
    }

    /// Writes to `out`, or stdout when absent.
    pub fn emit(&self, out: Option<&PathBuf>, format: Format) -> Result<(), CliError> {
        let bytes = self.render(format)?;
        match out {
            Some(path) => std::fs::write(path, bytes).map_err(|e| CliError::Io(path.display().to_string(), e)),
            None => std::io::stdout().write_all(&bytes).map_err(|e| CliError::Io("stdout".into(), e)),
        }
    }
}

fn cell_text(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// `--format` wins; otherwise `.csv` outputs are CSV and everything else JSON.
pub fn resolve_format(explicit: Option<Format>, out: Option<&PathBuf>) -> Format {
    explicit.unwrap_or_else(|| match out.and_then(|p| p.extension()).and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("csv") => Format::Csv,
        _ => Format::Json,
    })
}
