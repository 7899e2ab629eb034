//! Re-run an experiment and diff its outputs against stored baselines.
//!
//! Every CSV cell and JSON leaf listed in the baseline manifest is compared.
//! Numbers pass when `|a - b| / max(|a|, |b|, 1)` is within the tolerance of
//! their metric; any other value must match exactly. The metric of a CSV
//! cell is its column; the metric of a JSON leaf is looked up by its full
//! dotted path and then by shorter suffixes, down to the leaf key. Lookups
//! prefixed with `file:` take precedence.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::Value;

use crate::artifacts::{num, sha256_hex, write_manifest, Artifacts, Report, MANIFEST};
use crate::config::{check_command, read_config, CommandName, RegressionConfig};
use crate::error::CliError;
use crate::Failures;

enum Parsed {
    Table { header: Vec<String>, rows: Vec<Vec<String>> },
    Json(Vec<(String, Value)>),
}

/// Parsed result files of one run, keyed by manifest path.
type RunFiles = BTreeMap<String, Parsed>;

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, Value)>) {
    let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                flatten(&join(k), x, out);
            }
        }
        Value::Array(items) => {
            for (i, x) in items.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), x, out);
            }
        }
        leaf => out.push((prefix.to_string(), leaf.clone())),
    }
}

/// JSON leaves; summary checks are keyed by their metric name.
fn json_leaves(v: &Value) -> Vec<(String, Value)> {
    let mut out = Vec::new();
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                if let ("checks", Value::Array(checks)) = (k.as_str(), x) {
                    for c in checks {
                        let metric = c.get("metric").and_then(Value::as_str).unwrap_or("?");
                        out.push((format!("checks.{metric}"), c.get("value").cloned().unwrap_or(Value::Null)));
                    }
                } else {
                    flatten(k, x, &mut out);
                }
            }
        }
        other => flatten("", other, &mut out),
    }
    out
}

fn load_run(dir: &Path) -> Result<RunFiles, CliError> {
    let manifest_path = dir.join(MANIFEST);
    let text = fs::read_to_string(&manifest_path).map_err(|e| CliError::io(&manifest_path, e))?;
    let manifest: Value = serde_json::from_str(&text).map_err(|e| CliError::parse(&manifest_path, e.to_string()))?;
    let entries = manifest
        .get("files")
        .and_then(Value::as_array)
        .ok_or_else(|| CliError::parse(&manifest_path, "no files list"))?;
    let mut files = RunFiles::new();
    for entry in entries {
        let (Some(name), Some(sum)) = (entry.get("path").and_then(Value::as_str), entry.get("sha256").and_then(Value::as_str)) else {
            return Err(CliError::parse(&manifest_path, "file entry without path or sha256"));
        };
        let path = dir.join(name);
        let bytes = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        if sha256_hex(&bytes) != sum {
            return Err(CliError::parse(&path, "contents do not match the manifest checksum"));
        }
        let parsed = if name.ends_with(".csv") {
            let mut reader = csv::Reader::from_reader(bytes.as_slice());
            let header = reader
                .headers()
                .map_err(|e| CliError::parse(&path, e.to_string()))?
                .iter()
                .map(String::from)
                .collect();
            let rows = reader
                .records()
                .map(|r| r.map(|r| r.iter().map(String::from).collect()))
                .collect::<Result<Vec<Vec<String>>, _>>()
                .map_err(|e| CliError::parse(&path, e.to_string()))?;
            Parsed::Table { header, rows }
        } else if name.ends_with(".json") {
            let v: Value = serde_json::from_slice(&bytes).map_err(|e| CliError::parse(&path, e.to_string()))?;
            Parsed::Json(json_leaves(&v))
        } else {
            continue;
        };
        files.insert(name.to_string(), parsed);
    }
    Ok(files)
}

struct Tolerances<'a> {
    default: f64,
    by_metric: &'a BTreeMap<String, f64>,
}

impl Tolerances<'_> {
    fn lookup(&self, file: &str, metric: &str) -> f64 {
        let plain = strip_indices(metric);
        let parts: Vec<&str> = plain.split('.').collect();
        for i in 0..parts.len() {
            let key = parts[i..].join(".");
            for k in [format!("{file}:{key}"), key] {
                if let Some(t) = self.by_metric.get(&k) {
                    return *t;
                }
            }
        }
        self.default
    }
}

/// `a.b[2].c` -> `a.b.c`.
fn strip_indices(path: &str) -> String {
    let mut out = String::with_capacity(path.len());
    let mut depth = 0;
    for ch in path.chars() {
        match ch {
            '[' => depth += 1,
            ']' => depth -= 1,
            _ if depth == 0 => out.push(ch),
            _ => {}
        }
    }
    out
}

struct Drift {
    file: String,
    metric: String,
    location: String,
    baseline: String,
    current: String,
    difference: Option<f64>,
    tolerance: f64,
}

impl Drift {
    fn structural(file: &str, metric: &str, baseline: String, current: String) -> Self {
        Drift {
            file: file.to_string(),
            metric: metric.to_string(),
            location: String::new(),
            baseline,
            current,
            difference: None,
            tolerance: 0.0,
        }
    }
}

/// Worst scaled difference per `(file, metric)`, plus the drifted values.
#[derive(Default)]
struct Comparison {
    worst: BTreeMap<(String, String), (f64, f64)>,
    drifts: Vec<Drift>,
    compared: usize,
}

impl Comparison {
    fn value(&mut self, tol: &Tolerances, file: &str, metric: &str, location: String, a: &str, b: &str) {
        self.compared += 1;
        let t = tol.lookup(file, metric);
        match (a.parse::<f64>(), b.parse::<f64>()) {
            (Ok(x), Ok(y)) => {
                let d = if x == y { 0.0 } else { (x - y).abs() / x.abs().max(y.abs()).max(1.0) };
                let d = if d.is_nan() { f64::INFINITY } else { d };
                let slot = self.worst.entry((file.to_string(), strip_indices(metric))).or_insert((0.0, t));
                slot.0 = slot.0.max(d);
                if d > t {
                    self.drifts.push(Drift {
                        file: file.to_string(),
                        metric: metric.to_string(),
                        location,
                        baseline: a.to_string(),
                        current: b.to_string(),
                        difference: Some(d),
                        tolerance: t,
                    });
                }
            }
            _ if a == b => {}
            _ => self.drifts.push(Drift {
                location,
                ..Drift::structural(file, metric, a.to_string(), b.to_string())
            }),
        }
    }
}

fn leaf_text(v: &Value) -> String {
    match v {
        Value::Number(n) => n.as_f64().map(num).unwrap_or_else(|| n.to_string()),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn compare(baseline: &RunFiles, current: &RunFiles, tol: &Tolerances) -> Comparison {
    let mut cmp = Comparison::default();
    for (file, base) in baseline {
        let Some(cur) = current.get(file) else {
            cmp.drifts.push(Drift::structural(file, "file", "present".into(), "missing".into()));
            continue;
        };
        match (base, cur) {
            (Parsed::Table { header: hb, rows: rb }, Parsed::Table { header: hc, rows: rc }) => {
                if hb != hc {
                    cmp.drifts.push(Drift::structural(file, "header", hb.join(" "), hc.join(" ")));
                    continue;
                }
                if rb.len() != rc.len() {
                    cmp.drifts.push(Drift::structural(file, "rows", rb.len().to_string(), rc.len().to_string()));
                }
                for (i, (a, b)) in rb.iter().zip(rc).enumerate() {
                    for ((col, x), y) in hb.iter().zip(a).zip(b) {
                        cmp.value(tol, file, col, format!("row {}", i + 1), x, y);
                    }
                }
            }
            (Parsed::Json(lb), Parsed::Json(lc)) => {
                let current: BTreeMap<&str, &Value> = lc.iter().map(|(k, v)| (k.as_str(), v)).collect();
                for (key, v) in lb {
                    match current.get(key.as_str()) {
                        Some(w) => cmp.value(tol, file, key, key.clone(), &leaf_text(v), &leaf_text(w)),
                        None => cmp.drifts.push(Drift::structural(file, key, leaf_text(v), "missing".into())),
                    }
                }
                let keys: std::collections::BTreeSet<&str> = lb.iter().map(|(k, _)| k.as_str()).collect();
                for (key, w) in lc.iter().filter(|(k, _)| !keys.contains(k.as_str())) {
                    cmp.drifts.push(Drift::structural(file, key, "missing".into(), leaf_text(w)));
                }
            }
            _ => cmp.drifts.push(Drift::structural(file, "format", String::new(), String::new())),
        }
    }
    cmp
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn run(path: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<Failures, CliError> {
    let start = Instant::now();
    let mut cfg: RegressionConfig = read_config(path)?;
    check_command(cfg.command, CommandName::Regression, path)?;
    if cfg.experiment == CommandName::Regression {
        return Err(CliError::Usage("a regression cannot re-run another regression".into()));
    }
    if let Some(o) = out {
        cfg.output_dir = Some(o.to_path_buf());
    }
    let dir = cfg
        .output_dir
        .clone()
        .ok_or_else(|| CliError::Usage("no output directory: pass --out or set output_dir".into()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let baseline = load_run(&resolve(base, &cfg.baseline_dir))?;

    let mut artifacts = Artifacts::create(&dir)?;
    let run_dir = dir.join("current");
    let run_failures = crate::execute(cfg.experiment, &resolve(base, &cfg.config), seed, Some(&run_dir))?;
    let current = load_run(&run_dir)?;
    let tol = Tolerances {
        default: cfg.default_tolerance,
        by_metric: &cfg.tolerances,
    };
    let cmp = compare(&baseline, &current, &tol);

    let rows: Vec<Vec<String>> = cmp
        .drifts
        .iter()
        .map(|d| {
            vec![
                d.file.clone(),
                d.metric.clone(),
                d.location.clone(),
                d.baseline.clone(),
                d.current.clone(),
                d.difference.map(num).unwrap_or_default(),
                num(d.tolerance),
            ]
        })
        .collect();
    artifacts.csv("diff.csv", &["file", "metric", "location", "baseline", "current", "difference", "tolerance"], &rows)?;

    let mut report = Report::default();
    report.metric("experiment", cfg.experiment);
    report.metric("compared_values", cmp.compared);
    report.metric("drifted_values", cmp.drifts.len());
    report.metric("experiment_failures", &run_failures);
    for ((file, metric), (worst, t)) in &cmp.worst {
        report.at_most(&format!("{file}:{metric}"), *worst, *t);
    }
    let mut structural: Vec<String> = cmp.drifts.iter().filter(|d| d.difference.is_none()).map(|d| format!("{}:{}", d.file, d.metric)).collect();
    structural.dedup();
    for s in structural {
        report.holds(&s, false);
    }
    report.write(CommandName::Regression.as_str(), &mut artifacts)?;
    let echo = serde_json::to_value(&cfg).map_err(|e| CliError::parse(path, e.to_string()))?;
    write_manifest(&artifacts, CommandName::Regression.as_str(), &echo, &report, start.elapsed().as_secs_f64())?;
    Ok(report
        .failures()
        .iter()
        .map(|c| {
            if c.relation == ">=" {
                format!("{}: structural mismatch", c.metric)
            } else {
                format!("{} drifted: {:e} (tolerance {:e})", c.metric, c.value, c.limit)
            }
        })
        .collect())
}
