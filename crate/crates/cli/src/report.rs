//! Run reports: a JSON document plus one NDJSON line per check. Records are
//! deterministic; the timestamp lives only in the document envelope.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub check_id: String,
    /// Key into `docs/anchors.md`, naming the identity the check exercises.
    pub anchor: String,
    pub inputs_digest: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
}

impl Record {
    /// `passed` is derived from `residual < tolerance`; a NaN residual fails.
    pub fn new(check_id: impl Into<String>, anchor: &str, inputs: &Value, residual: f64, tolerance: f64) -> Self {
        let residual = if residual.is_nan() { f64::INFINITY } else { residual };
        Record {
            check_id: check_id.into(),
            anchor: anchor.to_string(),
            inputs_digest: digest(inputs),
            residual,
            tolerance,
            passed: residual < tolerance,
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: impl Serialize) -> Self {
        self.detail = serde_json::to_value(detail).ok();
        self
    }

    /// A check that could not be evaluated; recorded as failed with the error text.
    pub fn errored(check_id: impl Into<String>, anchor: &str, inputs: &Value, tolerance: f64, err: impl ToString) -> Self {
        Record::new(check_id, anchor, inputs, f64::INFINITY, tolerance)
            .with_detail(serde_json::json!({ "error": err.to_string() }))
    }
}

/// SHA-256 of the compact JSON form of `inputs` (object keys are sorted).
pub fn digest(inputs: &Value) -> String {
    let text = serde_json::to_string(inputs).expect("json values serialize");
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub timestamp: u64,
    pub config: RunConfig,
    pub summary: Summary,
    pub records: Vec<Record>,
}

impl Report {
    pub fn new(config: RunConfig, records: Vec<Record>) -> Self {
        let passed = records.iter().filter(|r| r.passed).count();
        let summary = Summary { total: records.len(), passed, failed: records.len() - passed };
        let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        Report { tool: "noether-lab", version: env!("CARGO_PKG_VERSION"), timestamp, config, summary, records }
    }

    pub fn all_passed(&self) -> bool {
        self.summary.failed == 0
    }

    pub fn ndjson(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        }
        out
    }

    /// Writes `report.json` and `records.ndjson` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf), IoError> {
        fs::create_dir_all(dir).map_err(|e| IoError::new(dir, e))?;
        let doc = dir.join("report.json");
        let lines = dir.join("records.ndjson");
        let text = serde_json::to_string_pretty(self).expect("report serializes");
        fs::write(&doc, text + "\n").map_err(|e| IoError::new(&doc, e))?;
        fs::write(&lines, self.ndjson()).map_err(|e| IoError::new(&lines, e))?;
        Ok((doc, lines))
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{path}: {source}")]
pub struct IoError {
    pub path: String,
    #[source]
    pub source: std::io::Error,
}

impl IoError {
    pub fn new(path: &Path, source: std::io::Error) -> Self {
        IoError { path: path.display().to_string(), source }
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| IoError::new(parent, e))?;
    }
    fs::write(path, text).map_err(|e| IoError::new(path, e))
}
