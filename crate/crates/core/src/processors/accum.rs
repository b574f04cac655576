//! Per-chunk accumulators. Each processor folds blocks into a private
//! accumulator; accumulators of different chunks merge associatively and
//! commutatively, and `finish` sorts everything, so results do not depend on
//! how the archive was partitioned.

use std::collections::{BTreeMap, HashMap, HashSet};

use chrono::{DateTime, Utc};

use super::config::{group_key, Direction, GroupBy, ProcessorKind, ThroughputParams};
use super::results::{CategoryRow, DistributionRow, ResultData, TopAccountRow, WindowCount, WindowHistogram};
use crate::accounts::EntityResolver;
use crate::anomaly::boomerang::{match_transfers, BoomerangTally, Transfer};
use crate::anomaly::payments::{is_payment, PaymentValueSummary, ValueFlows};
use crate::anomaly::spam::SpamAccumulator;
use crate::anomaly::wash::{TradeRecord, WashAccumulator};
use crate::decimal::{format_ratio, Amount};
use crate::model::{throughput_count, ActionCategory, Block};
use crate::throughput::{average_tps, epoch, max_tps, Denominator, ThroughputStats, Tps};

use super::results::percent_1dp;

fn bump(map: &mut HashMap<String, u64>, key: &str, n: u64) {
    match map.get_mut(key) {
        Some(v) => *v += n,
        None => {
            map.insert(key.to_string(), n);
        }
    }
}

fn merge_counts(into: &mut HashMap<String, u64>, from: HashMap<String, u64>) {
    for (k, n) in from {
        *into.entry(k).or_default() += n;
    }
}

/// Key for single-attribute groupings without allocating.
fn single_key<'a>(by: GroupBy, a: &'a crate::model::Action, category: &'a str) -> &'a str {
    match by {
        GroupBy::Sender => &a.sender,
        GroupBy::Receiver => &a.receiver,
        GroupBy::Name => &a.name,
        GroupBy::Category => category,
        GroupBy::Result => {
            if a.success {
                "success"
            } else {
                a.error_code.as_deref().unwrap_or("failed")
            }
        }
        GroupBy::Currency => a.currency.as_deref().unwrap_or(""),
    }
}

fn for_each_key(by: &[GroupBy], block: &Block, categories: &[ActionCategory], mut f: impl FnMut(&str)) {
    for (i, a) in block.actions.iter().enumerate() {
        let cat = categories.get(i).map_or("", |c| c.as_str());
        if let [one] = by {
            f(single_key(*one, a, cat));
        } else {
            f(&group_key(by, a, cat));
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ThroughputAcc {
    windows: BTreeMap<i64, u64>,
    total: u64,
    blocks: u64,
    first: Option<(u64, DateTime<Utc>)>,
    last: Option<(u64, DateTime<Utc>)>,
}

#[derive(Debug, Clone)]
pub enum Accumulator {
    Count { total: u64, windows: BTreeMap<i64, u64> },
    Group { counts: HashMap<String, u64> },
    GroupOverTime { windows: BTreeMap<i64, HashMap<String, u64>> },
    Top { accounts: HashMap<String, (u64, HashSet<String>)> },
    Distribution { counts: HashMap<(ActionCategory, String), u64> },
    Throughput(ThroughputAcc),
    Payments(PaymentValueSummary),
    Flows(ValueFlows),
    Spam(SpamAccumulator),
    Wash(WashAccumulator),
    Boomerang { tally: BoomerangTally, pending: Vec<Transfer> },
}

impl Accumulator {
    pub fn new(kind: &ProcessorKind) -> Self {
        match kind {
            ProcessorKind::CountTransactions { .. } => Accumulator::Count { total: 0, windows: BTreeMap::new() },
            ProcessorKind::GroupActions { .. } => Accumulator::Group { counts: HashMap::new() },
            ProcessorKind::GroupActionsOverTime { .. } => Accumulator::GroupOverTime { windows: BTreeMap::new() },
            ProcessorKind::TopAccounts { .. } => Accumulator::Top { accounts: HashMap::new() },
            ProcessorKind::ActionDistribution => Accumulator::Distribution { counts: HashMap::new() },
            ProcessorKind::Throughput(_) => Accumulator::Throughput(ThroughputAcc::default()),
            ProcessorKind::PaymentValues { .. } => Accumulator::Payments(PaymentValueSummary::default()),
            ProcessorKind::ValueFlow { .. } => Accumulator::Flows(ValueFlows::default()),
            ProcessorKind::SpamAccounts { .. } => Accumulator::Spam(SpamAccumulator::default()),
            ProcessorKind::WashTrades { .. } => Accumulator::Wash(WashAccumulator::default()),
            ProcessorKind::Boomerang { .. } => Accumulator::Boomerang { tally: BoomerangTally::default(), pending: Vec::new() },
        }
    }

    /// Folds one block in. `categories[i]` is the category of
    /// `block.actions[i]`; it may be empty when `kind` does not need them.
    pub fn observe(&mut self, kind: &ProcessorKind, block: &Block, categories: &[ActionCategory]) {
        match (self, kind) {
            (Accumulator::Count { total, windows }, ProcessorKind::CountTransactions { window }) => {
                let n = throughput_count(block);
                *total += n;
                if let Some(w) = window {
                    *windows.entry(w.start_of(block.timestamp)).or_default() += n;
                }
            }
            (Accumulator::Group { counts }, ProcessorKind::GroupActions { by }) => {
                for_each_key(by, block, categories, |k| bump(counts, k, 1));
            }
            (Accumulator::GroupOverTime { windows }, ProcessorKind::GroupActionsOverTime { by, window }) => {
                if block.actions.is_empty() {
                    return;
                }
                let counts = windows.entry(window.start_of(block.timestamp)).or_default();
                for_each_key(by, block, categories, |k| bump(counts, k, 1));
            }
            (Accumulator::Top { accounts }, ProcessorKind::TopAccounts { direction, names, .. }) => {
                for a in &block.actions {
                    if names.as_ref().is_some_and(|n| !n.contains(&a.name)) {
                        continue;
                    }
                    let (acct, other) = match direction {
                        Direction::Sent => (&a.sender, &a.receiver),
                        Direction::Received => (&a.receiver, &a.sender),
                    };
                    if acct.is_empty() {
                        continue;
                    }
                    let entry = match accounts.get_mut(acct.as_str()) {
                        Some(e) => e,
                        None => accounts.entry(acct.clone()).or_default(),
                    };
                    entry.0 += 1;
                    if !other.is_empty() && !entry.1.contains(other.as_str()) {
                        entry.1.insert(other.clone());
                    }
                }
            }
            (Accumulator::Distribution { counts }, ProcessorKind::ActionDistribution) => {
                for (a, c) in block.actions.iter().zip(categories) {
                    let key = (*c, a.name.clone());
                    *counts.entry(key).or_default() += 1;
                }
            }
            (Accumulator::Throughput(t), ProcessorKind::Throughput(p)) => {
                if let Some((s, e)) = p.observation {
                    if block.timestamp < s || block.timestamp >= e {
                        return;
                    }
                }
                let n = throughput_count(block);
                t.total += n;
                t.blocks += 1;
                *t.windows.entry(p.window.start_of(block.timestamp)).or_default() += n;
                let here = (block.height, block.timestamp);
                if t.first.map_or(true, |f| here.0 < f.0) {
                    t.first = Some(here);
                }
                if t.last.map_or(true, |l| here.0 > l.0) {
                    t.last = Some(here);
                }
            }
            (Accumulator::Payments(s), ProcessorKind::PaymentValues { rates }) => {
                let date = block.timestamp.date_naive();
                for a in block.actions.iter().filter(|a| is_payment(a)) {
                    s.add(a, rates, date);
                }
            }
            (Accumulator::Flows(f), ProcessorKind::ValueFlow { rates, registry }) => {
                let date = block.timestamp.date_naive();
                let mut resolver = EntityResolver::new(registry);
                for a in block.actions.iter().filter(|a| is_payment(a)) {
                    f.add(a, date, rates, &mut resolver);
                }
            }
            (Accumulator::Spam(s), ProcessorKind::SpamAccounts { .. }) => {
                for a in &block.actions {
                    s.add(a);
                }
            }
            (Accumulator::Wash(w), ProcessorKind::WashTrades { contract, names, fields, .. }) => {
                for a in &block.actions {
                    if !a.success || !names.contains(&a.name) || contract.as_ref().is_some_and(|c| *c != a.receiver) {
                        continue;
                    }
                    if let Some(t) = TradeRecord::from_action(a, fields) {
                        w.add(&t);
                    }
                }
            }
            (Accumulator::Boomerang { tally, pending }, ProcessorKind::Boomerang { window, .. }) => {
                let transfers: Vec<Transfer> = block
                    .actions
                    .iter()
                    .enumerate()
                    .filter_map(|(i, a)| Transfer::from_action(block.height, i as u64, a))
                    .collect();
                tally.count_outgoing(&transfers);
                if *window == 0 {
                    tally.add_matches(&match_transfers(&transfers, 0));
                } else {
                    pending.extend(transfers);
                }
            }
            _ => unreachable!("accumulator does not match its processor"),
        }
    }

    pub fn merge(&mut self, other: Accumulator) {
        match (self, other) {
            (Accumulator::Count { total, windows }, Accumulator::Count { total: t2, windows: w2 }) => {
                *total += t2;
                for (k, n) in w2 {
                    *windows.entry(k).or_default() += n;
                }
            }
            (Accumulator::Group { counts }, Accumulator::Group { counts: c2 }) => merge_counts(counts, c2),
            (Accumulator::GroupOverTime { windows }, Accumulator::GroupOverTime { windows: w2 }) => {
                for (k, c) in w2 {
                    merge_counts(windows.entry(k).or_default(), c);
                }
            }
            (Accumulator::Top { accounts }, Accumulator::Top { accounts: a2 }) => {
                for (k, (n, set)) in a2 {
                    let e = accounts.entry(k).or_default();
                    e.0 += n;
                    e.1.extend(set);
                }
            }
            (Accumulator::Distribution { counts }, Accumulator::Distribution { counts: c2 }) => {
                for (k, n) in c2 {
                    *counts.entry(k).or_default() += n;
                }
            }
            (Accumulator::Throughput(t), Accumulator::Throughput(o)) => {
                t.total += o.total;
                t.blocks += o.blocks;
                for (k, n) in o.windows {
                    *t.windows.entry(k).or_default() += n;
                }
                t.first = match (t.first, o.first) {
                    (Some(a), Some(b)) => Some(if b.0 < a.0 { b } else { a }),
                    (a, b) => a.or(b),
                };
                t.last = match (t.last, o.last) {
                    (Some(a), Some(b)) => Some(if b.0 > a.0 { b } else { a }),
                    (a, b) => a.or(b),
                };
            }
            (Accumulator::Payments(s), Accumulator::Payments(o)) => s.merge(o),
            (Accumulator::Flows(f), Accumulator::Flows(o)) => f.merge(o),
            (Accumulator::Spam(s), Accumulator::Spam(o)) => s.merge(o),
            (Accumulator::Wash(w), Accumulator::Wash(o)) => w.merge(o),
            (Accumulator::Boomerang { tally, pending }, Accumulator::Boomerang { tally: t2, pending: p2 }) => {
                tally.merge(t2);
                pending.extend(p2);
            }
            _ => unreachable!("merging accumulators of different processors"),
        }
    }

    pub fn finish(self, kind: &ProcessorKind, chain: crate::model::ChainId) -> ResultData {
        match (self, kind) {
            (Accumulator::Count { total, windows }, ProcessorKind::CountTransactions { window }) => match window {
                None => ResultData::Scalar { value: total },
                Some(w) => ResultData::CountSeries {
                    window_secs: w.secs(),
                    total,
                    windows: windows.into_iter().map(|(k, count)| WindowCount { window_start: epoch(k), count }).collect(),
                },
            },
            (Accumulator::Group { counts }, ProcessorKind::GroupActions { by }) => ResultData::KeyedHistogram {
                by: by.clone(),
                total: counts.values().sum(),
                counts: counts.into_iter().collect(),
            },
            (Accumulator::GroupOverTime { windows }, ProcessorKind::GroupActionsOverTime { by, window }) => ResultData::TimeSeries {
                by: by.clone(),
                window_secs: window.secs(),
                windows: windows
                    .into_iter()
                    .map(|(k, c)| WindowHistogram { window_start: epoch(k), counts: c.into_iter().collect() })
                    .collect(),
            },
            (Accumulator::Top { accounts }, ProcessorKind::TopAccounts { direction, n, .. }) => {
                let accounts_seen = accounts.len() as u64;
                let mut rows: Vec<TopAccountRow> = accounts
                    .into_iter()
                    .map(|(account, (count, set))| {
                        let unique = set.len() as u64;
                        let avg = (unique > 0).then(|| {
                            format_ratio(&num_rational::BigRational::new(count.into(), unique.into()), 2)
                        });
                        TopAccountRow { account, count, unique_counterparties: unique, avg_per_counterparty: avg }
                    })
                    .collect();
                rows.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.account.cmp(&b.account)));
                rows.truncate(*n);
                ResultData::TopAccounts { direction: *direction, accounts_seen, rows }
            }
            (Accumulator::Distribution { counts }, ProcessorKind::ActionDistribution) => distribution(counts),
            (Accumulator::Throughput(t), ProcessorKind::Throughput(p)) => throughput(t, p, chain),
            (Accumulator::Payments(summary), ProcessorKind::PaymentValues { .. }) => ResultData::PaymentValues {
                value_carrying_share: summary.value_carrying_share().map(|r| format_ratio(&r, 4)),
                value_carrying_share_of_known: summary.value_carrying_share_of_known().map(|r| format_ratio(&r, 4)),
                summary,
            },
            (Accumulator::Flows(f), ProcessorKind::ValueFlow { .. }) => ResultData::ValueFlows { skipped: f.skipped, flows: f.rows() },
            (Accumulator::Spam(s), ProcessorKind::SpamAccounts { thresholds }) => {
                let reports = s.reports(thresholds);
                let flagged = reports.iter().filter(|r| r.is_flagged()).count();
                ResultData::Anomalies {
                    summary: BTreeMap::from([
                        ("accounts".into(), Amount::from_int(s.accounts.len() as i64)),
                        ("flagged".into(), Amount::from_int(flagged as i64)),
                    ]),
                    reports,
                }
            }
            (Accumulator::Wash(w), ProcessorKind::WashTrades { thresholds, .. }) => {
                let reports = w.reports(thresholds);
                let flagged = reports.iter().filter(|r| r.is_flagged()).count();
                let (_, concentration) = w.concentration(thresholds.top_k);
                ResultData::Anomalies {
                    summary: BTreeMap::from([
                        ("trades".into(), Amount::from_int(w.total_trades() as i64)),
                        ("top_k".into(), Amount::from_int(thresholds.top_k as i64)),
                        ("top_k_concentration".into(), concentration),
                        ("flagged".into(), Amount::from_int(flagged as i64)),
                    ]),
                    reports,
                }
            }
            (Accumulator::Boomerang { mut tally, mut pending }, ProcessorKind::Boomerang { window, min_matches }) => {
                if *window > 0 {
                    pending.sort_by_key(|t| (t.height, t.seq));
                    tally.add_matches(&match_transfers(&pending, *window));
                }
                let reports = tally.reports(*window, *min_matches);
                let flagged = reports.iter().filter(|r| r.is_flagged()).count();
                ResultData::Anomalies {
                    summary: BTreeMap::from([
                        ("matched_pairs".into(), Amount::from_int(tally.matched_total() as i64)),
                        ("flagged".into(), Amount::from_int(flagged as i64)),
                    ]),
                    reports,
                }
            }
            _ => unreachable!("accumulator does not match its processor"),
        }
    }
}

fn distribution(counts: HashMap<(ActionCategory, String), u64>) -> ResultData {
    let total: u64 = counts.values().sum();
    let mut by_cat: BTreeMap<ActionCategory, u64> = BTreeMap::new();
    for ((c, _), n) in &counts {
        *by_cat.entry(*c).or_default() += n;
    }
    let mut rows: Vec<DistributionRow> = counts
        .into_iter()
        .map(|((c, name), count)| DistributionRow { category: c.as_str().into(), name, count, percent: percent_1dp(count, total) })
        .collect();
    let order = |s: &str| ActionCategory::ALL.iter().position(|c| c.as_str() == s).unwrap_or(usize::MAX);
    rows.sort_by(|a, b| {
        order(&a.category).cmp(&order(&b.category)).then_with(|| b.count.cmp(&a.count)).then_with(|| a.name.cmp(&b.name))
    });
    let categories = by_cat
        .into_iter()
        .map(|(c, count)| CategoryRow { category: c.as_str().into(), count, percent: percent_1dp(count, total) })
        .collect();
    ResultData::Distribution { total, categories, rows }
}

fn throughput(t: ThroughputAcc, p: &ThroughputParams, chain: crate::model::ChainId) -> ResultData {
    let (obs_start, obs_end) = match (p.observation, t.first, t.last) {
        (Some(o), _, _) if p.denominator == Denominator::Calendar => o,
        (_, Some(f), Some(l)) => match p.denominator {
            Denominator::Blocks => (f.1, l.1),
            Denominator::Calendar => (f.1, l.1 + chrono::Duration::seconds(1)),
        },
        (Some(o), _, _) => o,
        _ => (epoch(0), epoch(0)),
    };
    let avg = average_tps(t.total, obs_start, obs_end).unwrap_or_else(|_| Tps::zero());
    let (max, max_start) = max_tps(&t.windows, p.window.secs()).unwrap_or((Tps::zero(), obs_start));
    let stats = ThroughputStats {
        chain,
        observation_start: obs_start,
        observation_end: obs_end,
        denominator: p.denominator,
        first_block: t.first.map(|f| f.0),
        last_block: t.last.map(|l| l.0),
        blocks: t.blocks,
        total_transactions: t.total,
        avg_tps: avg,
        max_tps: max,
        max_window_start: max_start,
        window_secs: p.window.secs(),
        alleged_tps: p.alleged.clone(),
    };
    ResultData::Throughput {
        stats,
        windows: t.windows.into_iter().map(|(k, count)| WindowCount { window_start: epoch(k), count }).collect(),
    }
}
