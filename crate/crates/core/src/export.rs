//! CSV and JSON exports of processor results.
//!
//! `export_tables` writes the fixed set of tables consumed by the reporting
//! scripts; every table is written, header-only when no result feeds it.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};

use crate::anomaly::payments::PaymentClass;
use crate::processors::config::GroupBy;
use crate::processors::{ProcessorResult, ResultData};

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("no results found in {0}")]
    Empty(PathBuf),
    #[error("no result feeds table {0:?}")]
    MissingResult(String),
    #[error("unknown table {0:?}")]
    UnknownTable(String),
}

pub const TABLES: [&str; 7] = [
    "distribution.csv",
    "datasets.csv",
    "throughput_by_category.csv",
    "top_accounts.csv",
    "anomalies.csv",
    "flows.csv",
    "payment_values.csv",
];

/// Name of the manifest written next to results; never read as a result.
pub const MANIFEST_FILE: &str = "run_manifest.json";

fn ts(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExportError + '_ {
    move |source| ExportError::Io { path: path.to_path_buf(), source }
}

/// Reads results from a directory of per-processor JSON files, or from one
/// file holding a single result or an array of them.
pub fn load_results(path: &Path) -> Result<Vec<ProcessorResult>, ExportError> {
    let mut files = Vec::new();
    if path.is_dir() {
        for entry in fs::read_dir(path).map_err(io_err(path))? {
            let p = entry.map_err(io_err(path))?.path();
            let is_json = p.extension().is_some_and(|e| e == "json");
            if is_json && p.file_name().is_some_and(|n| n != MANIFEST_FILE) {
                files.push(p);
            }
        }
        files.sort();
    } else {
        files.push(path.to_path_buf());
    }
    let mut out = Vec::new();
    for f in files {
        let text = fs::read_to_string(&f).map_err(io_err(&f))?;
        let json_err = |source| ExportError::Json { path: f.clone(), source };
        let value: serde_json::Value = serde_json::from_str(&text).map_err(json_err)?;
        if value.is_array() {
            out.extend(serde_json::from_value::<Vec<ProcessorResult>>(value).map_err(json_err)?);
        } else {
            out.push(serde_json::from_value(value).map_err(json_err)?);
        }
    }
    if out.is_empty() {
        return Err(ExportError::Empty(path.to_path_buf()));
    }
    Ok(out)
}

fn to_string(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is utf-8")
}

fn writer(header: &[&str]) -> csv::Writer<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory writer");
    w
}

/// One CSV for one result, laid out by result kind.
pub fn result_csv(r: &ProcessorResult) -> Result<String, ExportError> {
    let w = match &r.data {
        ResultData::Scalar { value } => {
            let mut w = writer(&["name", "value"]);
            w.write_record([r.name.as_str(), &value.to_string()])?;
            w
        }
        ResultData::CountSeries { windows, .. } | ResultData::Throughput { windows, .. } => {
            let mut w = writer(&["window_start", "count"]);
            for c in windows {
                w.write_record([ts(&c.window_start), c.count.to_string()])?;
            }
            w
        }
        ResultData::KeyedHistogram { counts, .. } => {
            let mut w = writer(&["key", "count"]);
            for (k, n) in counts {
                w.write_record([k.as_str(), &n.to_string()])?;
            }
            w
        }
        ResultData::TimeSeries { windows, .. } => {
            let mut w = writer(&["window_start", "key", "count"]);
            for h in windows {
                let start = ts(&h.window_start);
                for (k, n) in &h.counts {
                    w.write_record([start.as_str(), k, &n.to_string()])?;
                }
            }
            w
        }
        ResultData::TopAccounts { rows, .. } => {
            let mut w = writer(&["rank", "account", "count", "unique_counterparties", "avg_per_counterparty"]);
            for (i, row) in rows.iter().enumerate() {
                w.write_record([
                    (i + 1).to_string(),
                    row.account.clone(),
                    row.count.to_string(),
                    row.unique_counterparties.to_string(),
                    row.avg_per_counterparty.clone().unwrap_or_default(),
                ])?;
            }
            w
        }
        ResultData::Distribution { rows, .. } => {
            let mut w = writer(&["category", "name", "count", "percent"]);
            for row in rows {
                w.write_record([row.category.as_str(), &row.name, &row.count.to_string(), &row.percent])?;
            }
            w
        }
        ResultData::PaymentValues { .. } => {
            let mut w = writer(&["kind", "key", "count"]);
            payment_rows(r, |kind, key, count| w.write_record([kind, key, &count]))?;
            w
        }
        ResultData::ValueFlows { flows, .. } => {
            let mut w = writer(&["sender_entity", "currency", "receiver_entity", "xrp_value"]);
            for f in flows {
                w.write_record([f.sender_entity.as_str(), &f.currency, &f.receiver_entity, &f.xrp_value.to_string()])?;
            }
            w
        }
        ResultData::Anomalies { .. } => {
            let mut w = writer(&["detector", "subject", "verdict", "metrics", "evidence"]);
            anomaly_rows(r, |row| w.write_record(&row[2..]))?;
            w
        }
    };
    Ok(to_string(w))
}

fn payment_rows(r: &ProcessorResult, mut emit: impl FnMut(&str, &str, String) -> csv::Result<()>) -> csv::Result<()> {
    let ResultData::PaymentValues { summary, value_carrying_share, value_carrying_share_of_known } = &r.data else {
        return Ok(());
    };
    emit("total", "payments", summary.total.to_string())?;
    for c in PaymentClass::ALL {
        emit("class", c.as_str(), summary.count(c).to_string())?;
    }
    for (code, n) in &summary.error_codes {
        emit("error_code", code, n.to_string())?;
    }
    emit("value", "value_carrying_xrp", summary.value_carrying_xrp.to_string())?;
    if let Some(s) = value_carrying_share {
        emit("share", "value_carrying_of_successful", s.clone())?;
    }
    if let Some(s) = value_carrying_share_of_known {
        emit("share", "value_carrying_of_known", s.clone())?;
    }
    Ok(())
}

/// Rows of `chain, processor, detector, subject, verdict, metrics, evidence`.
fn anomaly_rows(r: &ProcessorResult, mut emit: impl FnMut(Vec<String>) -> csv::Result<()>) -> csv::Result<()> {
    let ResultData::Anomalies { reports, .. } = &r.data else { return Ok(()) };
    for rep in reports {
        let metrics: Vec<String> = rep.metrics.iter().map(|(k, v)| format!("{k}={v}")).collect();
        emit(vec![
            r.chain.to_string(),
            r.name.clone(),
            rep.detector.clone(),
            rep.subject.join(";"),
            if rep.is_flagged() { "flagged" } else { "clean" }.into(),
            metrics.join(";"),
            rep.evidence.join(";"),
        ])?;
    }
    Ok(())
}

/// The reporting tables as `(file name, contents)`.
pub fn tables(results: &[ProcessorResult]) -> Result<Vec<(&'static str, String)>, ExportError> {
    let mut dist = writer(&["chain", "category", "name", "count", "percent"]);
    let mut datasets = writer(&[
        "chain",
        "name",
        "first_block",
        "last_block",
        "blocks",
        "observation_start",
        "observation_end",
        "transactions",
        "avg_tps",
        "max_tps",
        "max_window_start",
        "window_secs",
        "alleged_tps",
    ]);
    let mut by_cat = writer(&["chain", "name", "window_start", "category", "count"]);
    let mut top = writer(&["chain", "name", "direction", "rank", "account", "count", "unique_counterparties", "avg_per_counterparty"]);
    let mut anomalies = writer(&["chain", "processor", "detector", "subject", "verdict", "metrics", "evidence"]);
    let mut flows = writer(&["sender_entity", "currency", "receiver_entity", "xrp_value"]);
    let mut payments = writer(&["chain", "name", "kind", "key", "count"]);

    for r in results {
        let chain = r.chain.to_string();
        match &r.data {
            ResultData::Distribution { rows, .. } => {
                for row in rows {
                    dist.write_record([chain.as_str(), &row.category, &row.name, &row.count.to_string(), &row.percent])?;
                }
            }
            ResultData::Throughput { stats, .. } => {
                let opt = |v: Option<u64>| v.map(|n| n.to_string()).unwrap_or_default();
                datasets.write_record([
                    chain.clone(),
                    r.name.clone(),
                    opt(stats.first_block),
                    opt(stats.last_block),
                    stats.blocks.to_string(),
                    ts(&stats.observation_start),
                    ts(&stats.observation_end),
                    stats.total_transactions.to_string(),
                    stats.avg_tps.display(),
                    stats.max_tps.display(),
                    ts(&stats.max_window_start),
                    stats.window_secs.to_string(),
                    stats.alleged_tps.as_ref().map(ToString::to_string).unwrap_or_default(),
                ])?;
            }
            ResultData::TimeSeries { by, windows, .. } if by.as_slice() == [GroupBy::Category] => {
                for h in windows {
                    let start = ts(&h.window_start);
                    for (cat, n) in &h.counts {
                        by_cat.write_record([chain.as_str(), &r.name, &start, cat, &n.to_string()])?;
                    }
                }
            }
            ResultData::TopAccounts { direction, rows, .. } => {
                let dir = serde_json::to_value(direction).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
                for (i, row) in rows.iter().enumerate() {
                    top.write_record([
                        chain.clone(),
                        r.name.clone(),
                        dir.clone(),
                        (i + 1).to_string(),
                        row.account.clone(),
                        row.count.to_string(),
                        row.unique_counterparties.to_string(),
                        row.avg_per_counterparty.clone().unwrap_or_default(),
                    ])?;
                }
            }
            ResultData::Anomalies { .. } => anomaly_rows(r, |row| anomalies.write_record(&row))?,
            ResultData::ValueFlows { flows: rows, .. } => {
                for f in rows {
                    flows.write_record([f.sender_entity.as_str(), &f.currency, &f.receiver_entity, &f.xrp_value.to_string()])?;
                }
            }
            ResultData::PaymentValues { .. } => {
                payment_rows(r, |kind, key, count| payments.write_record([chain.as_str(), &r.name, kind, key, &count]))?
            }
            _ => {}
        }
    }
    Ok(TABLES.into_iter().zip([dist, datasets, by_cat, top, anomalies, flows, payments].map(to_string)).collect())
}

/// Table a result feeds, if any.
pub fn table_of(r: &ProcessorResult) -> Option<&'static str> {
    Some(match &r.data {
        ResultData::Distribution { .. } => TABLES[0],
        ResultData::Throughput { .. } => TABLES[1],
        ResultData::TimeSeries { by, .. } if by.as_slice() == [GroupBy::Category] => TABLES[2],
        ResultData::TopAccounts { .. } => TABLES[3],
        ResultData::Anomalies { .. } => TABLES[4],
        ResultData::ValueFlows { .. } => TABLES[5],
        ResultData::PaymentValues { .. } => TABLES[6],
        _ => return None,
    })
}

/// Writes reporting tables into `out_dir`; returns the paths written.
/// With `only`, just those tables are written and each must be fed by at
/// least one result; otherwise all tables are written.
pub fn export_tables(results: &[ProcessorResult], out_dir: &Path, only: Option<&[String]>) -> Result<Vec<PathBuf>, ExportError> {
    if let Some(only) = only {
        for t in only {
            let name = TABLES.iter().find(|n| **n == t.as_str() || n.trim_end_matches(".csv") == t.as_str());
            let name = name.ok_or_else(|| ExportError::UnknownTable(t.clone()))?;
            if !results.iter().any(|r| table_of(r) == Some(*name)) {
                return Err(ExportError::MissingResult(name.to_string()));
            }
        }
    }
    let wanted = |name: &str| {
        only.map_or(true, |o| o.iter().any(|t| t == name || t.as_str() == name.trim_end_matches(".csv")))
    };
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut written = Vec::new();
    for (name, text) in tables(results)?.into_iter().filter(|(n, _)| wanted(n)) {
        let p = out_dir.join(name);
        fs::write(&p, text).map_err(io_err(&p))?;
        written.push(p);
    }
    Ok(written)
}

/// Writes all results as one pretty-printed JSON array.
pub fn export_json(results: &[ProcessorResult], path: &Path) -> Result<(), ExportError> {
    let text = serde_json::to_string_pretty(results).map_err(|source| ExportError::Json { path: path.to_path_buf(), source })?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, text + "\n").map_err(io_err(path))
}
