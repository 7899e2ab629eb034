//! Result files, verification checks and the run manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use cylstokes_core::SpectralField;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";

/// Shortest round-trip text for a float.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

/// Output directory plus the list of files written so far, in write order.
pub struct Artifacts {
    dir: PathBuf,
    files: Vec<String>,
}

impl Artifacts {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn record(&mut self, name: &str) {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.record(name);
        Ok(())
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let path = self.dir.join(name);
        let fail = |e: csv::Error| CliError::parse(&path, e.to_string());
        w.write_record(header).map_err(fail)?;
        for r in rows {
            w.write_record(r).map_err(fail)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::parse(&path, e.to_string()))?;
        self.write_bytes(name, &bytes)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::parse(&self.dir.join(name), e.to_string()))?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    /// Field container plus its JSON sidecar.
    pub fn fields(&mut self, name: &str, fields: &[SpectralField], times: &[f64]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        cylstokes_core::io::write_series(&path, fields, times)?;
        self.record(name);
        self.record(&format!("{name}.json"));
        Ok(())
    }

    /// `(name, bytes, sha256)` of every recorded file.
    pub fn checksums(&self) -> Result<Vec<Value>, CliError> {
        self.files
            .iter()
            .map(|name| {
                let path = self.dir.join(name);
                let bytes = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
                Ok(json!({ "path": name, "bytes": bytes.len(), "sha256": sha256_hex(&bytes) }))
            })
            .collect()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub metric: String,
    pub value: f64,
    /// `<=` or `>=`.
    pub relation: &'static str,
    pub limit: f64,
    pub passed: bool,
}

/// Named metrics and pass/fail checks of one run.
#[derive(Debug, Default)]
pub struct Report {
    metrics: BTreeMap<String, Value>,
    checks: Vec<Check>,
}

impl Report {
    pub fn metric(&mut self, name: &str, value: impl Serialize) {
        self.metrics.insert(name.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    pub fn at_most(&mut self, metric: &str, value: f64, limit: f64) {
        self.checks.push(Check {
            metric: metric.to_string(),
            value,
            relation: "<=",
            limit,
            passed: value <= limit,
        });
    }

    pub fn at_least(&mut self, metric: &str, value: f64, limit: f64) {
        self.checks.push(Check {
            metric: metric.to_string(),
            value,
            relation: ">=",
            limit,
            passed: value >= limit,
        });
    }

    pub fn holds(&mut self, metric: &str, ok: bool) {
        self.at_least(metric, if ok { 1.0 } else { 0.0 }, 1.0);
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    /// Write `summary.json` and `summary.txt`.
    pub fn write(&self, command: &str, out: &mut Artifacts) -> Result<(), CliError> {
        let status = if self.failures().is_empty() { "ok" } else { "verification_failed" };
        out.json(
            "summary.json",
            &json!({ "command": command, "status": status, "metrics": self.metrics, "checks": self.checks }),
        )?;
        let mut text = format!("{command}: {status}\n");
        for (k, v) in &self.metrics {
            if !v.is_array() && !v.is_object() {
                writeln!(text, "  {k} = {v}").expect("string write");
            }
        }
        for c in &self.checks {
            let verdict = if c.passed { "PASS" } else { "FAIL" };
            writeln!(text, "  [{verdict}] {} = {:.6e} {} {:.3e}", c.metric, c.value, c.relation, c.limit).expect("string write");
        }
        out.write_bytes("summary.txt", text.as_bytes())
    }
}

/// Manifest with the config echo, version, thread count, wall time and the
/// checksum of every result file. It is the only output that varies between
/// otherwise identical runs.
pub fn write_manifest(out: &Artifacts, command: &str, config: &Value, report: &Report, wall_seconds: f64) -> Result<(), CliError> {
    let failed: Vec<&str> = report.failures().iter().map(|c| c.metric.as_str()).collect();
    let manifest = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "threads": rayon::current_num_threads(),
        "wall_time_seconds": wall_seconds,
        "status": if failed.is_empty() { "ok" } else { "verification_failed" },
        "failed_metrics": failed,
        "files": out.checksums()?,
    });
    let path = out.dir().join(MANIFEST);
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::parse(&path, e.to_string()))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))
}
