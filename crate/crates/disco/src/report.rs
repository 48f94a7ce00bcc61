//! Serialized outputs. Every CSV starts with a `# config_hash=` line and
//! every JSON document carries a `config_hash` key.

use std::fmt::Write as _;
use std::path::Path;

use serde_json::{json, Value};

use disco_core::metrics::{MetricsReport, PearsonMatrix};
use disco_core::trainer::EpochRecord;
use disco_core::MeanSem;

use crate::error::{CliError, CliResult};

pub fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn write_json(path: &Path, value: &Value) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON value serializes");
    text.push('\n');
    write_file(path, &text)
}

/// CSV text from a header and rows, preceded by the hash line.
pub fn csv_text(config_hash: &str, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 CSV");
    format!("# config_hash={config_hash}\n{body}")
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn history_csv(config_hash: &str, epochs: &[EpochRecord]) -> String {
    let rows: Vec<Vec<String>> = epochs
        .iter()
        .map(|r| vec![r.epoch.to_string(), r.train_obj.to_string(), opt(r.val_obj)])
        .collect();
    csv_text(config_hash, &["epoch", "train_obj", "val_obj"], &rows)
}

pub fn timing_csv(config_hash: &str, epochs: &[EpochRecord]) -> String {
    let rows: Vec<Vec<String>> = epochs
        .iter()
        .map(|r| vec![r.epoch.to_string(), format!("{:.6}", r.seconds)])
        .collect();
    csv_text(config_hash, &["epoch", "seconds"], &rows)
}

pub fn mean_sem_json(m: &MeanSem) -> Value {
    json!({ "mean": m.mean, "sem": m.sem })
}

fn pearson_json(p: &PearsonMatrix) -> Value {
    Value::Array(p.rows().map(|row| json!(row)).collect())
}

/// Distance keys are formatted with `{}` so they read back as the same number.
pub fn metrics_json(report: &MetricsReport) -> Value {
    let ff: serde_json::Map<String, Value> = report
        .ff
        .iter()
        .map(|(d, f)| (d.to_string(), json!(f)))
        .collect();
    json!({
        "counts": { "frames": report.frames, "k": report.k },
        "probloss": report.probloss.as_ref().ok().map(mean_sem_json),
        "probloss_error": report.probloss.as_ref().err().map(|e| e.to_string()),
        "mejee": mean_sem_json(&report.mejee),
        "majee": mean_sem_json(&report.majee),
        "ff": ff,
        "pearson": report.pearson.as_ref().map(pearson_json),
    })
}

/// One `metric,value` row per scalar; undefined values are left empty.
pub fn metrics_csv(config_hash: &str, report: &MetricsReport) -> String {
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut push = |name: String, v: Option<f64>| rows.push(vec![name, opt(v)]);
    push("frames".into(), Some(report.frames as f64));
    push("k".into(), Some(report.k as f64));
    let pl = report.probloss.as_ref().ok();
    push("probloss_mean".into(), pl.map(|m| m.mean));
    push("probloss_sem".into(), pl.map(|m| m.sem));
    push("mejee_mean".into(), Some(report.mejee.mean));
    push("mejee_sem".into(), Some(report.mejee.sem));
    push("majee_mean".into(), Some(report.majee.mean));
    push("majee_sem".into(), Some(report.majee.sem));
    for (d, f) in &report.ff {
        push(format!("ff@{d}"), Some(*f));
    }
    if let Some(p) = &report.pearson {
        for i in 0..p.size() {
            for j in 0..p.size() {
                push(format!("pearson_{i}_{j}"), p.get(i, j));
            }
        }
    }
    csv_text(config_hash, &["metric", "value"], &rows)
}

/// Adds the hash to a JSON object.
pub fn with_hash(config_hash: &str, mut value: Value) -> Value {
    if let Value::Object(map) = &mut value {
        map.insert("config_hash".into(), json!(config_hash));
    }
    value
}

/// The resolved config with its hash as a leading comment.
pub fn config_text(config_hash: &str, toml: &str) -> String {
    let mut s = String::new();
    writeln!(s, "# config_hash={config_hash}").unwrap();
    s.push_str(toml);
    s
}
