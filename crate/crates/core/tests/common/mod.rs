#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use sha2::{Digest, Sha256};
use txstats::processors::results::{TopAccountRow, WindowCount, WindowHistogram};
use txstats::processors::{PipelineConfig, ProcessorResult, ResultData};
use txstats::synth::SynthBlock;

pub const SIX_HOURS: i64 = 21_600;

/// The processor set recounted by [`Oracle`].
pub fn oracle_config(pattern: &str, start: u64, end: u64) -> PipelineConfig {
    let text = serde_json::json!({
        "Pattern": pattern,
        "StartBlock": start,
        "EndBlock": end,
        "Processors": [
            {"Name": "TransactionsCount", "Type": "count-transactions"},
            {"Name": "TransactionsPer6h", "Type": "count-transactions", "Params": {"Duration": "6h"}},
            {"Name": "ActionsByReceiver", "Type": "group-actions", "Params": {"By": "receiver"}},
            {"Name": "ActionsByName", "Type": "group-actions", "Params": {"By": "name"}},
            {"Name": "GroupedActionsOverTime", "Type": "group-actions-over-time", "Params": {"By": "receiver", "Duration": "6h"}},
            {"Name": "TopSenders", "Type": "top-accounts", "Params": {"Direction": "sent", "N": 25}},
            {"Name": "TopReceivers", "Type": "top-accounts", "Params": {"Direction": "received", "N": 25}}
        ]
    });
    PipelineConfig::from_json(&text.to_string()).unwrap()
}

/// Straightforward single-threaded recount from the generator's ground truth.
pub struct Oracle {
    pub transactions: u64,
    pub tx_per_window: BTreeMap<i64, u64>,
    pub by_receiver: BTreeMap<String, u64>,
    pub by_name: BTreeMap<String, u64>,
    pub receiver_over_time: BTreeMap<i64, BTreeMap<String, u64>>,
    pub top_senders: Vec<TopAccountRow>,
    pub top_receivers: Vec<TopAccountRow>,
}

fn window_start(ts: i64) -> i64 {
    ts.div_euclid(SIX_HOURS) * SIX_HOURS
}

fn avg_2dp(count: u64, unique: u64) -> String {
    let hundredths = (count as u128 * 200 + unique as u128) / (2 * unique as u128);
    format!("{}.{:02}", hundredths / 100, hundredths % 100)
}

fn top(counts: HashMap<String, (u64, HashSet<String>)>, n: usize) -> Vec<TopAccountRow> {
    let mut rows: Vec<TopAccountRow> = counts
        .into_iter()
        .map(|(account, (count, set))| {
            let unique = set.len() as u64;
            TopAccountRow {
                account,
                count,
                unique_counterparties: unique,
                avg_per_counterparty: if unique == 0 { None } else { Some(avg_2dp(count, unique)) },
            }
        })
        .collect();
    rows.sort_by(|a, b| b.count.cmp(&a.count).then(a.account.cmp(&b.account)));
    rows.truncate(n);
    rows
}

impl Oracle {
    pub fn recount<'a>(blocks: impl IntoIterator<Item = &'a SynthBlock>) -> Oracle {
        let mut o = Oracle {
            transactions: 0,
            tx_per_window: BTreeMap::new(),
            by_receiver: BTreeMap::new(),
            by_name: BTreeMap::new(),
            receiver_over_time: BTreeMap::new(),
            top_senders: Vec::new(),
            top_receivers: Vec::new(),
        };
        let mut sent: HashMap<String, (u64, HashSet<String>)> = HashMap::new();
        let mut received: HashMap<String, (u64, HashSet<String>)> = HashMap::new();
        for b in blocks {
            let w = window_start(b.timestamp.timestamp());
            o.transactions += b.txs.len() as u64;
            *o.tx_per_window.entry(w).or_insert(0) += b.txs.len() as u64;
            for a in b.actions() {
                *o.by_receiver.entry(a.receiver.clone()).or_insert(0) += 1;
                *o.by_name.entry(a.name.clone()).or_insert(0) += 1;
                *o.receiver_over_time.entry(w).or_default().entry(a.receiver.clone()).or_insert(0) += 1;
                if !a.sender.is_empty() {
                    let e = sent.entry(a.sender.clone()).or_default();
                    e.0 += 1;
                    if !a.receiver.is_empty() {
                        e.1.insert(a.receiver.clone());
                    }
                }
                if !a.receiver.is_empty() {
                    let e = received.entry(a.receiver.clone()).or_default();
                    e.0 += 1;
                    if !a.sender.is_empty() {
                        e.1.insert(a.sender.clone());
                    }
                }
            }
        }
        o.top_senders = top(sent, 25);
        o.top_receivers = top(received, 25);
        o
    }

    /// Compares pipeline results against the recount; returns the mismatches.
    pub fn mismatches(&self, results: &[ProcessorResult]) -> Vec<String> {
        let mut bad = Vec::new();
        let mut check = |name: &str, ok: bool| {
            if !ok {
                bad.push(name.to_string());
            }
        };
        for r in results {
            match (r.name.as_str(), &r.data) {
                ("TransactionsCount", ResultData::Scalar { value }) => check("TransactionsCount", *value == self.transactions),
                ("TransactionsPer6h", ResultData::CountSeries { total, windows, .. }) => {
                    let want: Vec<WindowCount> = self
                        .tx_per_window
                        .iter()
                        .map(|(k, c)| WindowCount { window_start: chrono::DateTime::from_timestamp(*k, 0).unwrap(), count: *c })
                        .collect();
                    check("TransactionsPer6h", *total == self.transactions && *windows == want)
                }
                ("ActionsByReceiver", ResultData::KeyedHistogram { counts, .. }) => check("ActionsByReceiver", *counts == self.by_receiver),
                ("ActionsByName", ResultData::KeyedHistogram { counts, .. }) => check("ActionsByName", *counts == self.by_name),
                ("GroupedActionsOverTime", ResultData::TimeSeries { windows, window_secs, .. }) => {
                    let want: Vec<WindowHistogram> = self
                        .receiver_over_time
                        .iter()
                        .map(|(k, c)| WindowHistogram { window_start: chrono::DateTime::from_timestamp(*k, 0).unwrap(), counts: c.clone() })
                        .collect();
                    check("GroupedActionsOverTime", *window_secs == SIX_HOURS && *windows == want)
                }
                ("TopSenders", ResultData::TopAccounts { rows, .. }) => check("TopSenders", *rows == self.top_senders),
                ("TopReceivers", ResultData::TopAccounts { rows, .. }) => check("TopReceivers", *rows == self.top_receivers),
                (other, _) => check(&format!("unexpected result {other}"), false),
            }
        }
        if results.len() != 7 {
            bad.push(format!("expected 7 results, got {}", results.len()));
        }
        bad
    }
}

pub fn results_hash(results: &[ProcessorResult]) -> String {
    format!("{:x}", Sha256::digest(serde_json::to_vec(results).unwrap()))
}

pub fn glob(dir: &Path, tag: &str) -> String {
    dir.join(format!("{tag}_blocks-*.jsonl.gz")).display().to_string()
}

/// Writes arbitrary lines as a gzip chunk, bypassing the archive checks.
pub fn write_raw_chunk(path: &Path, lines: &[String]) {
    use std::io::Write;
    let mut gz = flate2::write::GzEncoder::new(std::fs::File::create(path).unwrap(), flate2::Compression::default());
    for l in lines {
        gz.write_all(l.as_bytes()).unwrap();
        gz.write_all(b"\n").unwrap();
    }
    gz.finish().unwrap();
}
