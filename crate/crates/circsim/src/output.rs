//! CSV tables and JSON run summaries.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

/// Bumped whenever a CSV header or JSON field changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

/// Full double precision, scientific notation, independent of locale.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn config_hash(cfg: &RunConfig) -> String {
    sha256_hex(cfg.to_json().to_string().as_bytes())
}

/// What a command produced, before anything touches the disk.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub command: &'static str,
    pub table: Table,
    pub summary: Value,
    pub warnings: Vec<String>,
}

pub struct Written {
    pub csv: PathBuf,
    pub json: PathBuf,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn summary_json(cfg: &RunConfig, out: &RunOutput, csv_bytes: &[u8]) -> Value {
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    json!({
        "schema_version": SCHEMA_VERSION,
        "command": out.command,
        "version": env!("CARGO_PKG_VERSION"),
        "config_sha256": config_hash(cfg),
        "seed": cfg.seed,
        "timestamp_unix": timestamp,
        "csv": format!("{}.csv", out.command),
        "csv_sha256": sha256_hex(csv_bytes),
        "rows": out.table.rows.len(),
        "summary": out.summary,
        "warnings": out.warnings,
        "config": cfg.to_json(),
    })
}

/// Writes `<command>.csv` and `<command>.json` under the configured output
/// directory.
pub fn write_outputs(cfg: &RunConfig, out: &RunOutput) -> Result<Written, CliError> {
    let dir = &cfg.out_dir;
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let csv_bytes = out.table.to_csv();
    let csv = dir.join(format!("{}.csv", out.command));
    let json = dir.join(format!("{}.json", out.command));
    write_file(&csv, &csv_bytes)?;
    let summary = summary_json(cfg, out, &csv_bytes);
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serialises");
    text.push('\n');
    write_file(&json, text.as_bytes())?;
    Ok(Written { csv, json })
}
