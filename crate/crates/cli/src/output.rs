//! Run directories: columnar data, a key-value metadata file and a text summary.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

pub const METADATA_FILE: &str = "metadata.json";
pub const SUMMARY_FILE: &str = "summary.txt";

/// One strict-mode gate.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Collects everything one subcommand emits into its run directory.
#[derive(Debug)]
pub struct RunOutput {
    dir: PathBuf,
    metadata: Map<String, Value>,
    summary: Vec<String>,
    files: Vec<String>,
    checks: Vec<Check>,
}

impl RunOutput {
    pub fn create(dir: PathBuf, subcommand: &str) -> CliResult<Self> {
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        let mut metadata = Map::new();
        metadata.insert("subcommand".into(), subcommand.into());
        metadata.insert("version".into(), env!("CARGO_PKG_VERSION").into());
        Ok(Self { dir, metadata, summary: Vec::new(), files: Vec::new(), checks: Vec::new() })
    }

    pub fn meta(&mut self, key: &str, value: impl Into<Value>) {
        self.metadata.insert(key.into(), value.into());
    }

    pub fn line(&mut self, text: impl Into<String>) {
        self.summary.push(text.into());
    }

    pub fn check(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), pass, detail: detail.into() });
    }

    /// Writes a CSV file whose first line points at the metadata file.
    pub fn table(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> CliResult<()> {
        let path = self.dir.join(name);
        let mut file = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
        writeln!(file, "# run metadata: {METADATA_FILE}").map_err(|e| CliError::io(&path, e))?;
        let mut writer = csv::Writer::from_writer(file);
        writer.write_record(header).map_err(|e| CliError::csv(&path, e))?;
        for row in rows {
            writer.write_record(row.iter().map(|x| format_number(*x))).map_err(|e| CliError::csv(&path, e))?;
        }
        writer.flush().map_err(|e| CliError::io(&path, e))?;
        self.files.push(name.into());
        Ok(())
    }

    /// Writes metadata and summary, and returns whether every check passed.
    pub fn finish(mut self) -> CliResult<bool> {
        let passed = self.checks.iter().all(|c| c.pass);
        let checks: Map<String, Value> = self
            .checks
            .iter()
            .map(|c| (c.name.clone(), serde_json::json!({ "pass": c.pass, "detail": c.detail })))
            .collect();
        self.metadata.insert("checks".into(), Value::Object(checks));
        self.metadata.insert("checks_passed".into(), passed.into());
        self.metadata.insert("files".into(), self.files.clone().into());
        let meta_path = self.dir.join(METADATA_FILE);
        let text = serde_json::to_string_pretty(&self.metadata).map_err(|e| CliError::Usage(e.to_string()))?;
        fs::write(&meta_path, text + "\n").map_err(|e| CliError::io(&meta_path, e))?;

        let mut summary = self.summary.clone();
        for c in &self.checks {
            summary.push(format!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail));
        }
        let summary_path = self.dir.join(SUMMARY_FILE);
        fs::write(&summary_path, summary.join("\n") + "\n").map_err(|e| CliError::io(&summary_path, e))?;
        for line in &summary {
            println!("{line}");
        }
        println!("artifacts in {}", self.dir.display());
        Ok(passed)
    }
}

/// Shortest round-trip representation, so identical runs give identical bytes.
pub fn format_number(x: f64) -> String {
    if x.is_finite() && x != 0.0 && (x.abs() < 1e-3 || x.abs() >= 1e6) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// Reads a CSV written by [`RunOutput::table`], skipping `#` lines.
pub fn read_table(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader =
        csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).map_err(|e| CliError::csv(path, e))?;
    let header: Vec<String> = reader.headers().map_err(|e| CliError::csv(path, e))?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::csv(path, e))?;
        let row = record
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Usage(format!("{}: row {}: {e}", path.display(), i + 1)))?;
        rows.push(row);
    }
    Ok((header, rows))
}
