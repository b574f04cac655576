//! Pipeline configuration file.
//!
//! ```json
//! {
//!   "Pattern": "/data/eos_blocks-*.jsonl.gz",
//!   "StartBlock": 82152667,
//!   "EndBlock": 118286375,
//!   "Processors": [
//!     {"Name": "TransactionsCount", "Type": "count-transactions"},
//!     {"Name": "GroupedActionsOverTime", "Type": "group-actions-over-time",
//!      "Params": {"By": "receiver", "Duration": "6h"}}
//!   ]
//! }
//! ```
//!
//! Relative paths (pattern, rules, rate tables, registries) are resolved
//! against the directory holding the configuration file.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::window::Window;
use crate::accounts::{AccountsError, Registry};
use crate::adapters::{ClassificationRules, RulesError};
use crate::anomaly::payments::{RateTable, RatesError};
use crate::anomaly::spam::SpamThresholds;
use crate::anomaly::wash::{TradeFields, WashThresholds};
use crate::decimal::Amount;
use crate::model::{Action, ChainId};
use crate::storage::ArchivePattern;
use crate::throughput::{Denominator, MAX_TPS_WINDOW_SECS};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}, column {column}: {message}")]
    Json { line: usize, column: usize, message: String },
    #[error("processor {processor:?}: unknown processor type {kind:?}")]
    UnknownType { processor: String, kind: String },
    #[error("processor {processor:?}: missing parameter {param:?}")]
    MissingParam { processor: String, param: String },
    #[error("processor {processor:?}: parameter {param:?}: {reason}")]
    InvalidParam { processor: String, param: String, reason: String },
    #[error("processor name {0:?} is used twice")]
    DuplicateName(String),
    #[error("StartBlock {start} is after EndBlock {end}")]
    EmptyRange { start: u64, end: u64 },
    #[error("invalid field {field:?}: {reason}")]
    InvalidField { field: String, reason: String },
    #[error(transparent)]
    Rules(#[from] RulesError),
    #[error(transparent)]
    Rates(#[from] RatesError),
    #[error(transparent)]
    Accounts(#[from] AccountsError),
}

impl From<serde_json::Error> for ConfigError {
    fn from(e: serde_json::Error) -> Self {
        ConfigError::Json { line: e.line(), column: e.column(), message: e.to_string() }
    }
}

/// The configuration file as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "PascalCase", deny_unknown_fields)]
pub struct PipelineConfig {
    pub pattern: String,
    pub start_block: u64,
    pub end_block: u64,
    pub processors: Vec<ProcessorConfig>,
    /// Inferred from the chunk file names when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<String>,
    /// Classification rules file; the shipped rules are used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rules: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strict: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allow_gaps: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "PascalCase", deny_unknown_fields)]
pub struct ProcessorConfig {
    pub name: String,
    #[serde(rename = "Type")]
    pub kind: String,
    #[serde(default, skip_serializing_if = "Map::is_empty")]
    pub params: Map<String, Value>,
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: PipelineConfig = serde_json::from_str(text)?;
        if cfg.start_block > cfg.end_block {
            return Err(ConfigError::EmptyRange { start: cfg.start_block, end: cfg.end_block });
        }
        let mut names = BTreeSet::new();
        for p in &cfg.processors {
            if !names.insert(p.name.as_str()) {
                return Err(ConfigError::DuplicateName(p.name.clone()));
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, PathBuf), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((Self::from_json(&text)?, base))
    }

    pub fn pattern(&self, base_dir: &Path) -> ArchivePattern {
        ArchivePattern::new(resolve(base_dir, &self.pattern).display().to_string(), self.start_block, self.end_block)
    }

    pub fn chain(&self) -> Result<Option<ChainId>, ConfigError> {
        self.chain
            .as_deref()
            .map(|c| ChainId::from_str(c).map_err(|e| ConfigError::InvalidField { field: "Chain".into(), reason: e.to_string() }))
            .transpose()
    }

    pub fn rules(&self, chain: ChainId, base_dir: &Path) -> Result<ClassificationRules, ConfigError> {
        let rules = match &self.rules {
            Some(p) => ClassificationRules::load(&resolve(base_dir, p))?,
            None => ClassificationRules::shipped(chain),
        };
        if rules.chain != chain {
            return Err(ConfigError::InvalidField {
                field: "Rules".into(),
                reason: format!("rules are for {}, archive holds {chain}", rules.chain),
            });
        }
        Ok(rules)
    }

    /// Validates every processor entry.
    pub fn specs(&self, base_dir: &Path) -> Result<Vec<ProcessorSpec>, ConfigError> {
        self.processors.iter().map(|p| ProcessorSpec::parse(p, base_dir)).collect()
    }
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let path = Path::new(p);
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

/// Attribute an action is grouped by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupBy {
    Sender,
    Receiver,
    Name,
    Category,
    /// `success` or the error code.
    Result,
    Currency,
}

impl FromStr for GroupBy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "sender" => GroupBy::Sender,
            "receiver" => GroupBy::Receiver,
            "name" => GroupBy::Name,
            "category" => GroupBy::Category,
            "result" | "status" => GroupBy::Result,
            "currency" => GroupBy::Currency,
            other => return Err(format!("unknown attribute {other:?} (sender, receiver, name, category, result, currency)")),
        })
    }
}

impl fmt::Display for GroupBy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GroupBy::Sender => "sender",
            GroupBy::Receiver => "receiver",
            GroupBy::Name => "name",
            GroupBy::Category => "category",
            GroupBy::Result => "result",
            GroupBy::Currency => "currency",
        })
    }
}

/// Separator between the parts of a composite grouping key.
pub const KEY_SEPARATOR: &str = "|";

/// Grouping key of `action` for the attributes `by`.
pub fn group_key(by: &[GroupBy], action: &Action, category: &str) -> String {
    let part = |g: &GroupBy| -> &str {
        match g {
            GroupBy::Sender => &action.sender,
            GroupBy::Receiver => &action.receiver,
            GroupBy::Name => &action.name,
            GroupBy::Category => category,
            GroupBy::Result => {
                if action.success {
                    "success"
                } else {
                    action.error_code.as_deref().unwrap_or("failed")
                }
            }
            GroupBy::Currency => action.currency.as_deref().unwrap_or(""),
        }
    };
    match by {
        [one] => part(one).to_string(),
        many => many.iter().map(part).collect::<Vec<_>>().join(KEY_SEPARATOR),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Sent,
    Received,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputParams {
    pub window: Window,
    pub observation: Option<(DateTime<Utc>, DateTime<Utc>)>,
    pub alleged: Option<Amount>,
    pub denominator: Denominator,
}

/// A validated processor.
#[derive(Debug, Clone)]
pub struct ProcessorSpec {
    pub name: String,
    pub kind: ProcessorKind,
}

#[derive(Debug, Clone)]
pub enum ProcessorKind {
    CountTransactions { window: Option<Window> },
    GroupActions { by: Vec<GroupBy> },
    GroupActionsOverTime { by: Vec<GroupBy>, window: Window },
    TopAccounts { direction: Direction, n: usize, names: Option<BTreeSet<String>> },
    ActionDistribution,
    Throughput(ThroughputParams),
    PaymentValues { rates: Arc<RateTable> },
    ValueFlow { rates: Arc<RateTable>, registry: Arc<Registry> },
    SpamAccounts { thresholds: SpamThresholds },
    WashTrades { contract: Option<String>, names: BTreeSet<String>, fields: TradeFields, thresholds: WashThresholds },
    Boomerang { window: u64, min_matches: u64 },
}

impl ProcessorKind {
    pub fn type_name(&self) -> &'static str {
        match self {
            ProcessorKind::CountTransactions { .. } => "count-transactions",
            ProcessorKind::GroupActions { .. } => "group-actions",
            ProcessorKind::GroupActionsOverTime { .. } => "group-actions-over-time",
            ProcessorKind::TopAccounts { .. } => "top-accounts",
            ProcessorKind::ActionDistribution => "action-distribution",
            ProcessorKind::Throughput(_) => "throughput",
            ProcessorKind::PaymentValues { .. } => "payment-values",
            ProcessorKind::ValueFlow { .. } => "value-flow",
            ProcessorKind::SpamAccounts { .. } => "spam-accounts",
            ProcessorKind::WashTrades { .. } => "wash-trades",
            ProcessorKind::Boomerang { .. } => "boomerang",
        }
    }

    pub fn needs_categories(&self) -> bool {
        match self {
            ProcessorKind::ActionDistribution => true,
            ProcessorKind::GroupActions { by } | ProcessorKind::GroupActionsOverTime { by, .. } => by.contains(&GroupBy::Category),
            _ => false,
        }
    }
}

pub const PROCESSOR_TYPES: [&str; 11] = [
    "count-transactions",
    "group-actions",
    "group-actions-over-time",
    "top-accounts",
    "action-distribution",
    "throughput",
    "payment-values",
    "value-flow",
    "spam-accounts",
    "wash-trades",
    "boomerang",
];

struct Params<'a> {
    processor: &'a str,
    map: &'a Map<String, Value>,
    base_dir: &'a Path,
    used: BTreeSet<&'static str>,
}

impl<'a> Params<'a> {
    fn invalid(&self, param: &str, reason: impl Into<String>) -> ConfigError {
        ConfigError::InvalidParam { processor: self.processor.into(), param: param.into(), reason: reason.into() }
    }

    fn get(&mut self, key: &'static str) -> Option<&'a Value> {
        self.used.insert(key);
        self.map.get(key)
    }

    fn require(&mut self, key: &'static str) -> Result<&'a Value, ConfigError> {
        self.get(key).ok_or_else(|| ConfigError::MissingParam { processor: self.processor.into(), param: key.into() })
    }

    fn string(&mut self, key: &'static str) -> Result<Option<&'a str>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(self.invalid(key, "expected a string")),
        }
    }

    fn u64(&mut self, key: &'static str) -> Result<Option<u64>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Number(n)) => n.as_u64().map(Some).ok_or_else(|| self.invalid(key, "expected a non-negative integer")),
            Some(Value::String(s)) => s.parse().map(Some).map_err(|_| self.invalid(key, "expected a non-negative integer")),
            Some(_) => Err(self.invalid(key, "expected a non-negative integer")),
        }
    }

    fn amount(&mut self, key: &'static str) -> Result<Option<Amount>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => serde_json::from_value::<Amount>(v.clone()).map(Some).map_err(|e| self.invalid(key, e.to_string())),
        }
    }

    fn ratio(&mut self, key: &'static str, default: Amount) -> Result<Amount, ConfigError> {
        let v = self.amount(key)?.unwrap_or(default);
        if v.is_negative() || v > Amount::from_int(1) {
            return Err(self.invalid(key, "expected a ratio between 0 and 1"));
        }
        Ok(v)
    }

    fn window(&mut self, key: &'static str) -> Result<Option<Window>, ConfigError> {
        let parsed = match self.get(key) {
            None => return Ok(None),
            Some(Value::String(s)) => s.parse::<Window>().map_err(|e| e.to_string()),
            Some(Value::Number(n)) => n
                .as_i64()
                .ok_or_else(|| "expected whole seconds".to_string())
                .and_then(|secs| Window::from_secs(secs).map_err(|e| e.to_string())),
            Some(_) => Err("expected a duration such as \"6h\"".to_string()),
        };
        parsed.map(Some).map_err(|reason| self.invalid(key, reason))
    }

    fn strings(&mut self, key: &'static str) -> Result<Option<Vec<&'a str>>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(vec![s.as_str()])),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| v.as_str().ok_or_else(|| self.invalid(key, "expected a list of strings")))
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
            Some(_) => Err(self.invalid(key, "expected a string or a list of strings")),
        }
    }

    fn by(&mut self) -> Result<Vec<GroupBy>, ConfigError> {
        let raw = self.strings("By")?.ok_or_else(|| ConfigError::MissingParam { processor: self.processor.into(), param: "By".into() })?;
        if raw.is_empty() {
            return Err(self.invalid("By", "at least one attribute is required"));
        }
        raw.iter().map(|s| s.parse::<GroupBy>().map_err(|e| self.invalid("By", e))).collect()
    }

    fn instant(&mut self, key: &'static str) -> Result<Option<DateTime<Utc>>, ConfigError> {
        let Some(s) = self.string(key)? else { return Ok(None) };
        if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
            return Ok(Some(dt.with_timezone(&Utc)));
        }
        NaiveDate::from_str(s)
            .map(|d| Some(d.and_hms_opt(0, 0, 0).expect("midnight").and_utc()))
            .map_err(|_| self.invalid(key, "expected an RFC 3339 timestamp or a YYYY-MM-DD date"))
    }

    fn path(&mut self, key: &'static str) -> Result<Option<PathBuf>, ConfigError> {
        Ok(self.string(key)?.map(|p| resolve(self.base_dir, p)))
    }

    fn rates(&mut self) -> Result<Arc<RateTable>, ConfigError> {
        Ok(Arc::new(match self.path("Rates")? {
            Some(p) => RateTable::load(&p)?,
            None => RateTable::default(),
        }))
    }

    fn finish(self) -> Result<(), ConfigError> {
        match self.map.keys().find(|k| !self.used.contains(k.as_str())) {
            Some(k) => Err(self.invalid(k, "unknown parameter")),
            None => Ok(()),
        }
    }
}

impl ProcessorSpec {
    pub fn parse(cfg: &ProcessorConfig, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut p = Params { processor: &cfg.name, map: &cfg.params, base_dir, used: BTreeSet::new() };
        let kind = match cfg.kind.as_str() {
            "count-transactions" => ProcessorKind::CountTransactions { window: p.window("Duration")? },
            "group-actions" => ProcessorKind::GroupActions { by: p.by()? },
            "group-actions-over-time" => {
                let by = p.by()?;
                p.require("Duration")?;
                ProcessorKind::GroupActionsOverTime { by, window: p.window("Duration")?.expect("required") }
            }
            "top-accounts" => {
                let direction = match p.string("Direction")?.unwrap_or("sent") {
                    "sent" | "sender" => Direction::Sent,
                    "received" | "receiver" => Direction::Received,
                    other => return Err(p.invalid("Direction", format!("expected sent or received, got {other:?}"))),
                };
                let n = p.u64("N")?.unwrap_or(10);
                if n == 0 {
                    return Err(p.invalid("N", "must be at least 1"));
                }
                let names = p.strings("Names")?.map(|v| v.into_iter().map(str::to_string).collect());
                ProcessorKind::TopAccounts { direction, n: n as usize, names }
            }
            "action-distribution" => ProcessorKind::ActionDistribution,
            "throughput" => {
                let window = p.window("Duration")?.unwrap_or(Window::from_secs(MAX_TPS_WINDOW_SECS).expect("positive"));
                let start = p.instant("ObservationStart")?;
                let end = p.instant("ObservationEnd")?;
                let observation = match (start, end) {
                    (Some(s), Some(e)) if e > s => Some((s, e)),
                    (Some(_), Some(_)) => return Err(p.invalid("ObservationEnd", "must be after ObservationStart")),
                    (None, None) => None,
                    _ => return Err(p.invalid("ObservationStart", "ObservationStart and ObservationEnd go together")),
                };
                let alleged = p.amount("Alleged")?;
                let denominator = match p.string("Denominator")?.unwrap_or("calendar") {
                    "calendar" => Denominator::Calendar,
                    "blocks" => Denominator::Blocks,
                    other => return Err(p.invalid("Denominator", format!("expected calendar or blocks, got {other:?}"))),
                };
                ProcessorKind::Throughput(ThroughputParams { window, observation, alleged, denominator })
            }
            "payment-values" => ProcessorKind::PaymentValues { rates: p.rates()? },
            "value-flow" => {
                let rates = p.rates()?;
                let registry = match p.path("Registry")? {
                    Some(path) => Registry::load(&path)?,
                    None => Registry::default(),
                };
                ProcessorKind::ValueFlow { rates, registry: Arc::new(registry) }
            }
            "spam-accounts" => {
                let d = SpamThresholds::default();
                let thresholds = SpamThresholds {
                    min_volume: p.u64("MinVolume")?.unwrap_or(d.min_volume),
                    failure_ratio: p.ratio("FailureRatio", d.failure_ratio)?,
                    type_share: p.ratio("TypeShare", d.type_share)?,
                    min_cluster: p.u64("MinCluster")?.map_or(d.min_cluster, |n| n as usize),
                };
                ProcessorKind::SpamAccounts { thresholds }
            }
            "wash-trades" => {
                let d = WashThresholds::default();
                let thresholds = WashThresholds {
                    self_trade_ratio: p.ratio("SelfTradeRatio", d.self_trade_ratio)?,
                    balance_drift: p.ratio("BalanceDrift", d.balance_drift)?,
                    balanced_share: p.ratio("BalancedShare", d.balanced_share)?,
                    top_k: p.u64("TopK")?.map_or(d.top_k, |n| n as usize),
                };
                let names = p
                    .strings("Names")?
                    .map(|v| v.into_iter().map(str::to_string).collect())
                    .unwrap_or_else(|| BTreeSet::from(["verifytrade2".to_string(), "verifytrade3".to_string()]));
                let fields = match p.get("Fields") {
                    None => TradeFields::default(),
                    Some(v) => serde_json::from_value(v.clone()).map_err(|e| p.invalid("Fields", e.to_string()))?,
                };
                let contract = p.string("Contract")?.map(str::to_string);
                ProcessorKind::WashTrades { contract, names, fields, thresholds }
            }
            "boomerang" => ProcessorKind::Boomerang {
                window: p.u64("Window")?.unwrap_or(0),
                min_matches: p.u64("MinMatches")?.unwrap_or(1).max(1),
            },
            other => return Err(ConfigError::UnknownType { processor: cfg.name.clone(), kind: other.to_string() }),
        };
        p.finish()?;
        Ok(ProcessorSpec { name: cfg.name.clone(), kind })
    }
}

/// Parameters echoed into results for traceability.
pub fn describe(kind: &ProcessorKind) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    let by_str = |by: &[GroupBy]| by.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
    match kind {
        ProcessorKind::CountTransactions { window: Some(w) } => {
            m.insert("Duration".into(), w.to_string());
        }
        ProcessorKind::GroupActions { by } => {
            m.insert("By".into(), by_str(by));
        }
        ProcessorKind::GroupActionsOverTime { by, window } => {
            m.insert("By".into(), by_str(by));
            m.insert("Duration".into(), window.to_string());
            m.insert("WindowAlignment".into(), "epoch".into());
        }
        ProcessorKind::Throughput(t) => {
            m.insert("Duration".into(), t.window.to_string());
            m.insert("WindowAlignment".into(), "epoch".into());
        }
        ProcessorKind::Boomerang { window, .. } => {
            m.insert("Window".into(), window.to_string());
        }
        _ => {}
    }
    m
}
