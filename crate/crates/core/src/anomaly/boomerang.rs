//! Boomerang transfers: A sends x of a token to contract C, C sends the same
//! x back to A and additionally sends A some other token.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{push_evidence, ratio_amount, AnomalyReport, Verdict};
use crate::decimal::Amount;
use crate::model::Action;

pub const DETECTOR: &str = "boomerang";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transfer {
    pub height: u64,
    /// Position of the action within its block.
    pub seq: u64,
    pub tx_id: String,
    pub from: String,
    pub to: String,
    pub amount: Amount,
    pub currency: String,
}

impl Transfer {
    /// Token transfer actions with an amount; `from`/`to` come from the
    /// payload and fall back to sender/receiver.
    pub fn from_action(height: u64, seq: u64, a: &Action) -> Option<Transfer> {
        if a.name != "transfer" || !a.success {
            return None;
        }
        let amount = a.amount.clone()?;
        let currency = a.currency.clone()?;
        Some(Transfer {
            height,
            seq,
            tx_id: a.tx_id.clone(),
            from: a.payload_str("from").unwrap_or(&a.sender).to_string(),
            to: a.payload_str("to").unwrap_or(&a.receiver).to_string(),
            amount,
            currency,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoomerangMatch {
    pub account: String,
    pub contract: String,
    pub tx_id: String,
    pub amount: Amount,
    pub currency: String,
    pub bonus_currency: String,
}

/// Matches round trips in `transfers` (sorted by height then seq). With
/// `window == 0` all three transfers must share a transaction; otherwise the
/// return legs may follow within `window` blocks. Every transfer is used by
/// at most one match.
pub fn match_transfers(transfers: &[Transfer], window: u64) -> Vec<BoomerangMatch> {
    let mut by_route: HashMap<(&str, &str), Vec<usize>> = HashMap::new();
    for (i, t) in transfers.iter().enumerate() {
        by_route.entry((t.from.as_str(), t.to.as_str())).or_default().push(i);
    }
    let mut used = vec![false; transfers.len()];
    let mut matches = Vec::new();
    for (i, out) in transfers.iter().enumerate() {
        if used[i] || out.from == out.to {
            continue;
        }
        let Some(returns) = by_route.get(&(out.to.as_str(), out.from.as_str())) else { continue };
        let start = returns.partition_point(|&j| j <= i);
        let eligible = |j: usize| {
            let t = &transfers[j];
            !used[j]
                && if window == 0 {
                    t.height == out.height && t.tx_id == out.tx_id
                } else {
                    t.height <= out.height.saturating_add(window)
                }
        };
        let in_reach = |j: &&usize| transfers[**j].height <= out.height.saturating_add(window);
        let refund = returns[start..]
            .iter()
            .take_while(in_reach)
            .copied()
            .find(|&j| eligible(j) && transfers[j].currency == out.currency && transfers[j].amount == out.amount);
        let bonus = returns[start..]
            .iter()
            .take_while(in_reach)
            .copied()
            .find(|&j| eligible(j) && transfers[j].currency != out.currency);
        if let (Some(r), Some(b)) = (refund, bonus) {
            used[i] = true;
            used[r] = true;
            used[b] = true;
            matches.push(BoomerangMatch {
                account: out.from.clone(),
                contract: out.to.clone(),
                tx_id: out.tx_id.clone(),
                amount: out.amount.clone(),
                currency: out.currency.clone(),
                bonus_currency: transfers[b].currency.clone(),
            });
        }
    }
    matches
}

/// Mergeable pair statistics for transaction-local matching.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BoomerangTally {
    /// (account, contract) -> (matches, evidence)
    pub pairs: BTreeMap<(String, String), (u64, Vec<String>)>,
    /// account -> outgoing transfers
    pub outgoing: HashMap<String, u64>,
}

impl BoomerangTally {
    pub fn count_outgoing(&mut self, transfers: &[Transfer]) {
        for t in transfers {
            *self.outgoing.entry(t.from.clone()).or_default() += 1;
        }
    }

    pub fn add_matches(&mut self, matches: &[BoomerangMatch]) {
        for m in matches {
            let e = self.pairs.entry((m.account.clone(), m.contract.clone())).or_default();
            e.0 += 1;
            push_evidence(&mut e.1, &m.tx_id);
        }
    }

    pub fn merge(&mut self, other: BoomerangTally) {
        for (k, (n, ev)) in other.pairs {
            let e = self.pairs.entry(k).or_default();
            e.0 += n;
            for id in ev {
                push_evidence(&mut e.1, &id);
            }
        }
        for (k, n) in other.outgoing {
            *self.outgoing.entry(k).or_default() += n;
        }
    }

    pub fn matched_total(&self) -> u64 {
        self.pairs.values().map(|(n, _)| n).sum()
    }

    /// One report per (account, contract) pair with at least one match.
    pub fn reports(&self, window: u64, min_matches: u64) -> Vec<AnomalyReport> {
        self.pairs
            .iter()
            .map(|((account, contract), (n, evidence))| {
                let outgoing = self.outgoing.get(account).copied().unwrap_or(0);
                let flagged = *n >= min_matches;
                AnomalyReport {
                    detector: DETECTOR.into(),
                    subject: vec![account.clone(), contract.clone()],
                    metrics: BTreeMap::from([
                        ("matched_pairs".into(), Amount::from_int(*n as i64)),
                        ("outgoing_transfers".into(), Amount::from_int(outgoing as i64)),
                        ("share_of_outgoing".into(), ratio_amount(*n, outgoing)),
                        ("window_blocks".into(), Amount::from_int(window as i64)),
                        ("min_matches".into(), Amount::from_int(min_matches as i64)),
                    ]),
                    evidence: evidence.clone(),
                    verdict: if flagged { Verdict::Flagged } else { Verdict::Clean },
                }
            })
            .collect()
    }
}

pub fn detect_boomerang(transfers: &[Transfer], window: u64) -> Vec<AnomalyReport> {
    let mut tally = BoomerangTally::default();
    tally.count_outgoing(transfers);
    tally.add_matches(&match_transfers(transfers, window));
    tally.reports(window, 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(height: u64, seq: u64, tx: &str, from: &str, to: &str, amount: &str, cur: &str) -> Transfer {
        Transfer {
            height,
            seq,
            tx_id: tx.into(),
            from: from.into(),
            to: to.into(),
            amount: amount.parse().unwrap(),
            currency: cur.into(),
        }
    }

    #[test]
    fn eidos_round_trip() {
        let ts = vec![
            t(1, 0, "x", "alice", "eidosonecoin", "1.0000", "EOS"),
            t(1, 1, "x", "eidosonecoin", "alice", "1.0000", "EOS"),
            t(1, 2, "x", "eidosonecoin", "alice", "0.0321", "EIDOS"),
        ];
        let reports = detect_boomerang(&ts, 0);
        assert_eq!(reports.len(), 1);
        assert!(reports[0].is_flagged());
        assert_eq!(reports[0].subject, vec!["alice", "eidosonecoin"]);
        assert_eq!(reports[0].metric("share_of_outgoing").unwrap(), &Amount::from_int(1));
    }

    #[test]
    fn one_way_payment_and_refund_only() {
        let ts = vec![t(1, 0, "a", "alice", "bob", "5", "EOS")];
        assert!(detect_boomerang(&ts, 0).is_empty());
        let ts = vec![t(1, 0, "a", "alice", "bob", "5", "EOS"), t(1, 1, "a", "bob", "alice", "5", "EOS")];
        assert!(detect_boomerang(&ts, 0).is_empty());
    }

    #[test]
    fn window_controls_cross_transaction_matches() {
        let ts = vec![
            t(1, 0, "a", "alice", "c", "1", "EOS"),
            t(2, 0, "b", "c", "alice", "1", "EOS"),
            t(2, 1, "b", "c", "alice", "9", "EIDOS"),
        ];
        assert!(match_transfers(&ts, 0).is_empty());
        assert_eq!(match_transfers(&ts, 1).len(), 1);
        let late = vec![ts[0].clone(), t(5, 0, "b", "c", "alice", "1", "EOS"), t(5, 1, "b", "c", "alice", "9", "EIDOS")];
        assert!(match_transfers(&late, 2).is_empty());
    }

    #[test]
    fn transfers_are_used_once() {
        let ts = vec![
            t(1, 0, "x", "alice", "c", "1", "EOS"),
            t(1, 1, "x", "alice", "c", "1", "EOS"),
            t(1, 2, "x", "c", "alice", "1", "EOS"),
            t(1, 3, "x", "c", "alice", "2", "EIDOS"),
        ];
        assert_eq!(match_transfers(&ts, 0).len(), 1);
    }
}
