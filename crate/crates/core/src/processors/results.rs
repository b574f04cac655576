//! Processor outputs.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::config::{Direction, GroupBy};
use crate::anomaly::payments::{FlowRow, PaymentValueSummary};
use crate::anomaly::AnomalyReport;
use crate::decimal::Amount;
use crate::model::ChainId;
use crate::throughput::ThroughputStats;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessorResult {
    pub name: String,
    #[serde(rename = "type")]
    pub processor_type: String,
    pub chain: ChainId,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, String>,
    pub data: ResultData,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowCount {
    pub window_start: DateTime<Utc>,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowHistogram {
    pub window_start: DateTime<Utc>,
    pub counts: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopAccountRow {
    pub account: String,
    pub count: u64,
    pub unique_counterparties: u64,
    /// `count / unique_counterparties` to 2 decimals; absent without
    /// counterparties.
    pub avg_per_counterparty: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistributionRow {
    pub category: String,
    pub name: String,
    pub count: u64,
    /// One decimal, rounded half up.
    pub percent: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryRow {
    pub category: String,
    pub count: u64,
    pub percent: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ResultData {
    Scalar {
        value: u64,
    },
    CountSeries {
        window_secs: i64,
        total: u64,
        windows: Vec<WindowCount>,
    },
    KeyedHistogram {
        by: Vec<GroupBy>,
        total: u64,
        counts: BTreeMap<String, u64>,
    },
    TimeSeries {
        by: Vec<GroupBy>,
        window_secs: i64,
        windows: Vec<WindowHistogram>,
    },
    TopAccounts {
        direction: Direction,
        accounts_seen: u64,
        rows: Vec<TopAccountRow>,
    },
    Distribution {
        total: u64,
        categories: Vec<CategoryRow>,
        rows: Vec<DistributionRow>,
    },
    Throughput {
        stats: ThroughputStats,
        windows: Vec<WindowCount>,
    },
    PaymentValues {
        summary: PaymentValueSummary,
        /// Value-carrying share of successful payments, 4 decimals.
        value_carrying_share: Option<String>,
        /// Same share with unknown-rate payments left out.
        value_carrying_share_of_known: Option<String>,
    },
    ValueFlows {
        skipped: u64,
        flows: Vec<FlowRow>,
    },
    Anomalies {
        summary: BTreeMap<String, Amount>,
        reports: Vec<AnomalyReport>,
    },
}

/// `count / total` as a percentage with one decimal, rounded half up.
pub fn percent_1dp(count: u64, total: u64) -> String {
    if total == 0 {
        return "0.0".into();
    }
    let tenths = (count as u128 * 2000 + total as u128) / (2 * total as u128);
    format!("{}.{}", tenths / 10, tenths % 10)
}
