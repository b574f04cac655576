//! Detectors for wash trading, boomerang transfers, spam accounts and
//! zero-value payments.

pub mod boomerang;
pub mod payments;
pub mod spam;
pub mod wash;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::decimal::Amount;

/// Evidence lists keep at most this many transaction ids.
pub const EVIDENCE_CAP: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Flagged,
    Clean,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnomalyReport {
    pub detector: String,
    pub subject: Vec<String>,
    /// Measured values and the thresholds they were compared against.
    pub metrics: BTreeMap<String, Amount>,
    pub evidence: Vec<String>,
    pub verdict: Verdict,
}

impl AnomalyReport {
    pub fn is_flagged(&self) -> bool {
        self.verdict == Verdict::Flagged
    }

    pub fn metric(&self, key: &str) -> Option<&Amount> {
        self.metrics.get(key)
    }
}

pub(crate) fn push_evidence(evidence: &mut Vec<String>, tx_id: &str) {
    if evidence.len() < EVIDENCE_CAP && !tx_id.is_empty() && !evidence.iter().any(|e| e == tx_id) {
        evidence.push(tx_id.to_string());
    }
}

/// Exact ratio as an amount (rounded to 18 digits); zero when `den` is zero.
pub(crate) fn ratio_amount(num: u64, den: u64) -> Amount {
    if den == 0 {
        return Amount::zero();
    }
    Amount::from_int(num as i64).ratio(&Amount::from_int(den as i64)).map(|r| Amount::from_rational(&r)).unwrap_or_default()
}
