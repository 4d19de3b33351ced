use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::Serialize;
use serde_json::{json, Value};

pub const SCHEMA: u32 = 1;
pub const OUTPUT_DIR_ENV: &str = "ADELIC_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// A CSV table: header plus rows of already formatted cells.
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| quote(c)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

fn quote(cell: &str) -> String {
    if cell.contains([',', '"', '\n']) {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}

/// Everything a subcommand produces; rendered as JSON or CSV.
pub struct Report {
    pub command: &'static str,
    pub config: Value,
    pub result: Value,
    pub table: Table,
    pub summary: String,
}

pub struct Execution {
    started: Instant,
    pub workers: usize,
}

impl Execution {
    pub fn start(workers: usize) -> Self {
        Self { started: Instant::now(), workers }
    }
}

fn render_json(report: &Report, exec: &Execution) -> Result<String> {
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let doc = json!({
        "schema": SCHEMA,
        "command": report.command,
        "config": report.config,
        "result": report.result,
        // the only fields allowed to differ between reproducible runs
        "execution": {
            "timestamp": timestamp,
            "wall_time_s": exec.started.elapsed().as_secs_f64(),
            "workers": exec.workers,
        },
    });
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    Ok(text)
}

/// Resolves the destination: `--output`, relocated into `$ADELIC_OUTPUT_DIR`
/// when that is set. `None` means stdout.
pub fn destination(output: Option<&Path>, default_name: &str) -> Option<PathBuf> {
    let dir = std::env::var_os(OUTPUT_DIR_ENV).filter(|d| !d.is_empty());
    match (output, dir) {
        (Some(path), Some(dir)) => Some(Path::new(&dir).join(path.file_name().unwrap_or(path.as_os_str()))),
        (None, Some(dir)) => Some(Path::new(&dir).join(default_name)),
        (Some(path), None) => Some(path.to_path_buf()),
        (None, None) => None,
    }
}

/// Writes the report and returns the one-line summary.
pub fn emit(report: Report, exec: Execution, format: Format, output: Option<&Path>) -> Result<String> {
    let ext = match format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let text = match format {
        Format::Csv => report.table.render(),
        Format::Json => render_json(&report, &exec)?,
    };
    let target = destination(output, &format!("{}.{ext}", report.command));
    match &target {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
            }
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        }
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    let written = target.map(|p| format!(" -> {}", p.display())).unwrap_or_default();
    Ok(format!("{}: {}{written}", report.command, report.summary))
}
