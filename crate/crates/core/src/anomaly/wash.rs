//! Wash-trade detection on DEX settlement actions.
//!
//! For each account: the share of its trades where it is both buyer and
//! seller, and per currency the net balance change relative to the larger
//! of its sent and received totals. An account whose trades are mostly
//! self-trades and whose balances barely move is flagged.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use super::{push_evidence, ratio_amount, AnomalyReport, Verdict};
use crate::adapters::eosio::parse_asset;
use crate::decimal::{cmp_ratio, Amount};
use crate::model::Action;

pub const DETECTOR: &str = "wash-trades";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TradeRecord {
    pub buyer: String,
    pub seller: String,
    pub base_amount: Amount,
    pub base_currency: String,
    pub quote_amount: Amount,
    pub quote_currency: String,
    pub fee_buyer: Amount,
    pub fee_seller: Amount,
    pub tx_id: String,
}

impl TradeRecord {
    pub fn is_self_trade(&self) -> bool {
        self.buyer == self.seller
    }

    /// Reads a settlement action's payload. Quantities are asset strings
    /// (`"12.5000 EOS"`); fees may be asset strings or plain numbers.
    pub fn from_action(action: &Action, fields: &TradeFields) -> Option<TradeRecord> {
        let buyer = action.payload_str(&fields.buyer)?;
        let seller = action.payload_str(&fields.seller)?;
        let (base_amount, base_currency) = parse_asset(action.payload_str(&fields.base)?)?;
        let (quote_amount, quote_currency) = parse_asset(action.payload_str(&fields.quote)?)?;
        if base_amount.is_negative() || quote_amount.is_negative() {
            return None;
        }
        let fee = |key: &str| -> Amount {
            match action.payload.get(key) {
                Some(serde_json::Value::String(s)) => parse_asset(s).map(|(a, _)| a).or_else(|| s.parse().ok()).unwrap_or_default(),
                Some(serde_json::Value::Number(n)) => n.to_string().parse().unwrap_or_default(),
                _ => Amount::zero(),
            }
        };
        Some(TradeRecord {
            buyer: buyer.to_string(),
            seller: seller.to_string(),
            base_amount,
            base_currency,
            quote_amount,
            quote_currency,
            fee_buyer: fee(&fields.buyer_fee),
            fee_seller: fee(&fields.seller_fee),
            tx_id: action.tx_id.clone(),
        })
    }
}

/// Payload keys of a settlement action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "PascalCase", default)]
pub struct TradeFields {
    pub buyer: String,
    pub seller: String,
    pub base: String,
    pub quote: String,
    pub buyer_fee: String,
    pub seller_fee: String,
}

impl Default for TradeFields {
    fn default() -> Self {
        TradeFields {
            buyer: "buyer".into(),
            seller: "seller".into(),
            base: "base".into(),
            quote: "quote".into(),
            buyer_fee: "buyer_fee".into(),
            seller_fee: "seller_fee".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WashThresholds {
    pub self_trade_ratio: Amount,
    pub balance_drift: Amount,
    /// Share of an account's currencies that must stay under the drift.
    pub balanced_share: Amount,
    pub top_k: usize,
}

impl Default for WashThresholds {
    fn default() -> Self {
        WashThresholds {
            self_trade_ratio: "0.5".parse().expect("literal"),
            balance_drift: "0.01".parse().expect("literal"),
            balanced_share: "0.5".parse().expect("literal"),
            top_k: 5,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Flow {
    sent: Amount,
    received: Amount,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct AccountTrades {
    trades: u64,
    self_trades: u64,
    flows: BTreeMap<String, Flow>,
    fees: Amount,
    evidence: Vec<String>,
}

/// Mergeable per-account trade statistics.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WashAccumulator {
    accounts: HashMap<String, AccountTrades>,
    /// (buyer, seller) -> trades, for exact concentration.
    pairs: HashMap<(String, String), u64>,
    total_trades: u64,
}

impl WashAccumulator {
    pub fn add(&mut self, t: &TradeRecord) {
        self.total_trades += 1;
        *self.pairs.entry((t.buyer.clone(), t.seller.clone())).or_default() += 1;
        let buyer = self.accounts.entry(t.buyer.clone()).or_default();
        buyer.trades += 1;
        buyer.fees += &t.fee_buyer;
        buyer.flows.entry(t.base_currency.clone()).or_default().received += &t.base_amount;
        buyer.flows.entry(t.quote_currency.clone()).or_default().sent += &t.quote_amount;
        if t.is_self_trade() {
            buyer.self_trades += 1;
            buyer.fees += &t.fee_seller;
            buyer.flows.entry(t.base_currency.clone()).or_default().sent += &t.base_amount;
            buyer.flows.entry(t.quote_currency.clone()).or_default().received += &t.quote_amount;
            push_evidence(&mut buyer.evidence, &t.tx_id);
            return;
        }
        let seller = self.accounts.entry(t.seller.clone()).or_default();
        seller.trades += 1;
        seller.fees += &t.fee_seller;
        seller.flows.entry(t.base_currency.clone()).or_default().sent += &t.base_amount;
        seller.flows.entry(t.quote_currency.clone()).or_default().received += &t.quote_amount;
    }

    pub fn merge(&mut self, other: WashAccumulator) {
        self.total_trades += other.total_trades;
        for (k, n) in other.pairs {
            *self.pairs.entry(k).or_default() += n;
        }
        for (acct, o) in other.accounts {
            let a = self.accounts.entry(acct).or_default();
            a.trades += o.trades;
            a.self_trades += o.self_trades;
            a.fees += &o.fees;
            for (cur, f) in o.flows {
                let mine = a.flows.entry(cur).or_default();
                mine.sent += &f.sent;
                mine.received += &f.received;
            }
            for e in o.evidence {
                push_evidence(&mut a.evidence, &e);
            }
        }
    }

    pub fn total_trades(&self) -> u64 {
        self.total_trades
    }

    /// Top `k` accounts by trades involved in, and the share of all trades
    /// involving at least one of them.
    pub fn concentration(&self, k: usize) -> (Vec<String>, Amount) {
        let mut ranked: Vec<(&String, u64)> = self.accounts.iter().map(|(a, s)| (a, s.trades)).collect();
        ranked.sort_by(|x, y| y.1.cmp(&x.1).then_with(|| x.0.cmp(y.0)));
        let top: BTreeSet<&String> = ranked.iter().take(k).map(|(a, _)| *a).collect();
        let covered: u64 =
            self.pairs.iter().filter(|((b, s), _)| top.contains(b) || top.contains(s)).map(|(_, n)| *n).sum();
        let mut names: Vec<String> = ranked.iter().take(k).map(|(a, _)| (*a).clone()).collect();
        names.truncate(k);
        (names, ratio_amount(covered, self.total_trades))
    }

    /// One report per account, sorted by account.
    pub fn reports(&self, th: &WashThresholds) -> Vec<AnomalyReport> {
        let (_, concentration) = self.concentration(th.top_k);
        let mut accounts: Vec<&String> = self.accounts.keys().collect();
        accounts.sort();
        accounts
            .into_iter()
            .map(|acct| {
                let s = &self.accounts[acct];
                let self_ratio = BigRational::new(s.self_trades.into(), s.trades.max(1).into());
                let mut currencies = 0u64;
                let mut balanced = 0u64;
                let mut max_change = Amount::zero();
                for f in s.flows.values() {
                    let larger = if f.sent >= f.received { &f.sent } else { &f.received };
                    let Some(change) = (f.sent.clone() - f.received.clone()).abs().ratio(larger) else { continue };
                    currencies += 1;
                    if cmp_ratio(&change, &th.balance_drift).is_lt() {
                        balanced += 1;
                    }
                    let change = Amount::from_rational(&change);
                    if change > max_change {
                        max_change = change;
                    }
                }
                let balanced_share = BigRational::new(balanced.into(), currencies.max(1).into());
                let flagged = s.trades > 0
                    && currencies > 0
                    && cmp_ratio(&self_ratio, &th.self_trade_ratio).is_ge()
                    && cmp_ratio(&balanced_share, &th.balanced_share).is_gt();
                let metrics = BTreeMap::from([
                    ("trades".into(), Amount::from_int(s.trades as i64)),
                    ("self_trades".into(), Amount::from_int(s.self_trades as i64)),
                    ("self_trade_ratio".into(), Amount::from_rational(&self_ratio)),
                    ("currencies".into(), Amount::from_int(currencies as i64)),
                    ("balanced_currencies".into(), Amount::from_int(balanced as i64)),
                    ("balanced_currency_share".into(), Amount::from_rational(&balanced_share)),
                    ("max_balance_change".into(), max_change),
                    ("fees".into(), s.fees.clone()),
                    ("top_k_concentration".into(), concentration.clone()),
                    ("self_trade_threshold".into(), th.self_trade_ratio.clone()),
                    ("drift_threshold".into(), th.balance_drift.clone()),
                    ("balanced_share_threshold".into(), th.balanced_share.clone()),
                ]);
                AnomalyReport {
                    detector: DETECTOR.into(),
                    subject: vec![acct.clone()],
                    metrics,
                    evidence: if flagged { s.evidence.clone() } else { Vec::new() },
                    verdict: if flagged { Verdict::Flagged } else { Verdict::Clean },
                }
            })
            .collect()
    }
}

pub fn detect_wash_trades<'a>(trades: impl IntoIterator<Item = &'a TradeRecord>, th: &WashThresholds) -> Vec<AnomalyReport> {
    let mut acc = WashAccumulator::default();
    for t in trades {
        acc.add(t);
    }
    acc.reports(th)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trade(buyer: &str, seller: &str, base: &str, quote: &str, id: &str) -> TradeRecord {
        let (ba, bc) = parse_asset(base).unwrap();
        let (qa, qc) = parse_asset(quote).unwrap();
        TradeRecord {
            buyer: buyer.into(),
            seller: seller.into(),
            base_amount: ba,
            base_currency: bc,
            quote_amount: qa,
            quote_currency: qc,
            fee_buyer: Amount::zero(),
            fee_seller: Amount::zero(),
            tx_id: id.into(),
        }
    }

    fn report<'a>(reports: &'a [AnomalyReport], acct: &str) -> &'a AnomalyReport {
        reports.iter().find(|r| r.subject == [acct]).unwrap()
    }

    #[test]
    fn mostly_self_trading_account_is_flagged() {
        let mut trades = Vec::new();
        for i in 0..88 {
            trades.push(trade("wash", "wash", "10.0000 EOS", "25.0000 USDT", &format!("s{i}")));
        }
        for i in 0..12 {
            let (b, s) = if i % 2 == 0 { ("wash", "other") } else { ("other", "wash") };
            trades.push(trade(b, s, "0.0100 EOS", "0.0250 USDT", &format!("o{i}")));
        }
        let reports = detect_wash_trades(&trades, &WashThresholds::default());
        let w = report(&reports, "wash");
        assert!(w.is_flagged());
        assert_eq!(w.metric("self_trade_ratio").unwrap(), &"0.88".parse().unwrap());
        assert_eq!(w.evidence.len(), super::super::EVIDENCE_CAP);
        assert!(!report(&reports, "other").is_flagged());
    }

    #[test]
    fn honest_trader_is_clean() {
        let trades: Vec<_> = (0..20).map(|i| trade("buyer", &format!("s{i}"), "100.0000 EOS", "250.0000 USDT", "t")).collect();
        let reports = detect_wash_trades(&trades, &WashThresholds::default());
        assert!(reports.iter().all(|r| !r.is_flagged()));
        assert_eq!(report(&reports, "buyer").metric("self_trades").unwrap(), &Amount::zero());
    }

    #[test]
    fn concentration_counts_each_trade_once() {
        let trades = [trade("a", "b", "1 X", "1 Y", "1"), trade("a", "b", "1 X", "1 Y", "2"), trade("c", "d", "1 X", "1 Y", "3")];
        let mut acc = WashAccumulator::default();
        trades.iter().for_each(|t| acc.add(t));
        let (top, share) = acc.concentration(2);
        assert_eq!(top, vec!["a", "b"]);
        assert_eq!(share, ratio_amount(2, 3));
    }

    #[test]
    fn empty_stream() {
        assert!(detect_wash_trades(&[], &WashThresholds::default()).is_empty());
    }

    #[test]
    fn balance_ratio_is_scale_invariant() {
        let base = vec![
            trade("w", "w", "10 A", "20 B", "1"),
            trade("w", "x", "3 A", "6 B", "2"),
            trade("x", "w", "1 A", "2 B", "3"),
        ];
        let scaled: Vec<_> = base
            .iter()
            .map(|t| TradeRecord {
                base_amount: t.base_amount.clone() * Amount::from_int(1000),
                quote_amount: t.quote_amount.clone() * Amount::from_int(1000),
                ..t.clone()
            })
            .collect();
        let th = WashThresholds::default();
        let a = detect_wash_trades(&base, &th);
        let b = detect_wash_trades(&scaled, &th);
        assert_eq!(report(&a, "w").metric("max_balance_change"), report(&b, "w").metric("max_balance_change"));
    }
}
