//! Spam accounts: very high volume combined with either near-total failure or
//! a single repeated transaction type shared with other accounts through a
//! common destination tag.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use super::{push_evidence, AnomalyReport, Verdict};
use crate::decimal::{cmp_ratio, Amount};
use crate::model::Action;

pub const DETECTOR: &str = "spam-accounts";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpamThresholds {
    pub min_volume: u64,
    pub failure_ratio: Amount,
    pub type_share: Amount,
    /// Accounts needed on one destination tag to form a cluster.
    pub min_cluster: usize,
}

impl Default for SpamThresholds {
    fn default() -> Self {
        SpamThresholds {
            min_volume: 100_000,
            failure_ratio: "0.99".parse().expect("literal"),
            type_share: "0.98".parse().expect("literal"),
            min_cluster: 2,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AccountActivity {
    pub total: u64,
    pub failed: u64,
    pub by_type: BTreeMap<String, u64>,
    pub destination_tags: BTreeMap<u64, u64>,
    pub failed_evidence: Vec<String>,
}

impl AccountActivity {
    fn dominant_type(&self) -> Option<(&str, u64)> {
        self.by_type.iter().max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0))).map(|(k, v)| (k.as_str(), *v))
    }

    fn failure_ratio(&self) -> BigRational {
        BigRational::new(self.failed.into(), self.total.max(1).into())
    }

    fn type_share(&self) -> BigRational {
        BigRational::new(self.dominant_type().map_or(0, |(_, n)| n).into(), self.total.max(1).into())
    }
}

/// Per-sender tallies, mergeable across chunks.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SpamAccumulator {
    pub accounts: HashMap<String, AccountActivity>,
}

impl SpamAccumulator {
    pub fn add(&mut self, a: &Action) {
        let acct = match self.accounts.get_mut(a.sender.as_str()) {
            Some(acct) => acct,
            None => self.accounts.entry(a.sender.clone()).or_default(),
        };
        acct.total += 1;
        if !a.success {
            acct.failed += 1;
            push_evidence(&mut acct.failed_evidence, &a.tx_id);
        }
        match acct.by_type.get_mut(a.name.as_str()) {
            Some(n) => *n += 1,
            None => {
                acct.by_type.insert(a.name.clone(), 1);
            }
        }
        if let Some(tag) = a.destination_tag {
            *acct.destination_tags.entry(tag).or_default() += 1;
        }
    }

    pub fn merge(&mut self, other: SpamAccumulator) {
        for (k, o) in other.accounts {
            let a = self.accounts.entry(k).or_default();
            a.total += o.total;
            a.failed += o.failed;
            for (t, n) in o.by_type {
                *a.by_type.entry(t).or_default() += n;
            }
            for (t, n) in o.destination_tags {
                *a.destination_tags.entry(t).or_default() += n;
            }
            for e in o.failed_evidence {
                push_evidence(&mut a.failed_evidence, &e);
            }
        }
    }

    pub fn reports(&self, th: &SpamThresholds) -> Vec<AnomalyReport> {
        spam_account_report(&self.accounts, th)
    }
}

/// Reports every account that reaches the volume floor or one of the ratio
/// thresholds; accounts below the floor are never flagged.
pub fn spam_account_report(accounts: &HashMap<String, AccountActivity>, th: &SpamThresholds) -> Vec<AnomalyReport> {
    let high_volume = |a: &AccountActivity| a.total >= th.min_volume;
    let repetitive = |a: &AccountActivity| cmp_ratio(&a.type_share(), &th.type_share).is_ge();
    let failing = |a: &AccountActivity| cmp_ratio(&a.failure_ratio(), &th.failure_ratio).is_ge();

    let mut tag_members: BTreeMap<u64, BTreeSet<&str>> = BTreeMap::new();
    for (addr, a) in accounts {
        if high_volume(a) && repetitive(a) {
            for tag in a.destination_tags.keys() {
                tag_members.entry(*tag).or_default().insert(addr);
            }
        }
    }

    let mut addrs: Vec<&String> = accounts.keys().collect();
    addrs.sort();
    let mut reports = Vec::new();
    for addr in addrs {
        let a = &accounts[addr];
        if !(high_volume(a) || repetitive(a) || failing(a)) {
            continue;
        }
        let cluster = a
            .destination_tags
            .keys()
            .filter_map(|t| tag_members.get(t).map(|m| (m.len(), *t)))
            .filter(|(n, _)| *n >= th.min_cluster)
            .max_by(|x, y| x.0.cmp(&y.0).then_with(|| y.1.cmp(&x.1)));
        let by_failure = high_volume(a) && failing(a);
        let by_cluster = high_volume(a) && repetitive(a) && cluster.is_some();
        let flagged = by_failure || by_cluster;
        let mut metrics = BTreeMap::from([
            ("total".into(), Amount::from_int(a.total as i64)),
            ("failed".into(), Amount::from_int(a.failed as i64)),
            ("failure_ratio".into(), Amount::from_rational(&a.failure_ratio())),
            ("dominant_type_share".into(), Amount::from_rational(&a.type_share())),
            ("min_volume".into(), Amount::from_int(th.min_volume as i64)),
            ("failure_ratio_threshold".into(), th.failure_ratio.clone()),
            ("type_share_threshold".into(), th.type_share.clone()),
            ("min_cluster".into(), Amount::from_int(th.min_cluster as i64)),
        ]);
        if let Some((size, tag)) = cluster {
            metrics.insert("shared_destination_tag".into(), Amount::from_int(tag as i64));
            metrics.insert("cluster_size".into(), Amount::from_int(size as i64));
        }
        let mut subject = vec![addr.clone()];
        if let Some((_, tag)) = cluster {
            subject.extend(tag_members[&tag].iter().filter(|m| **m != addr.as_str()).map(|m| m.to_string()));
        }
        reports.push(AnomalyReport {
            detector: DETECTOR.into(),
            subject,
            metrics,
            evidence: if by_failure { a.failed_evidence.clone() } else { Vec::new() },
            verdict: if flagged { Verdict::Flagged } else { Verdict::Clean },
        });
    }
    reports
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ChainId;

    fn activity(total: u64, failed: u64, kind: &str, tag: Option<u64>) -> AccountActivity {
        AccountActivity {
            total,
            failed,
            by_type: BTreeMap::from([(kind.to_string(), total)]),
            destination_tags: tag.map(|t| BTreeMap::from([(t, 1)])).unwrap_or_default(),
            failed_evidence: vec![],
        }
    }

    #[test]
    fn failing_high_volume_account() {
        let accounts = HashMap::from([
            ("rSpam".to_string(), activity(4_488_127, 4_488_126, "Payment", None)),
            ("rSmall".to_string(), activity(50, 50, "Payment", None)),
        ]);
        let reports = spam_account_report(&accounts, &SpamThresholds::default());
        let spam = reports.iter().find(|r| r.subject[0] == "rSpam").unwrap();
        assert!(spam.is_flagged());
        let small = reports.iter().find(|r| r.subject[0] == "rSmall").unwrap();
        assert!(!small.is_flagged());
    }

    #[test]
    fn destination_tag_cluster() {
        let mut offers = activity(200_000, 0, "OfferCreate", Some(104398));
        offers.by_type.insert("Payment".into(), 1_000);
        offers.total += 1_000;
        let accounts = HashMap::from([
            ("rH1".to_string(), offers.clone()),
            ("rH2".to_string(), offers),
            ("rLone".to_string(), activity(300_000, 0, "OfferCreate", Some(7))),
        ]);
        let reports = spam_account_report(&accounts, &SpamThresholds::default());
        let get = |a: &str| reports.iter().find(|r| r.subject[0] == a).unwrap();
        assert!(get("rH1").is_flagged());
        assert_eq!(get("rH1").subject, vec!["rH1", "rH2"]);
        assert_eq!(get("rH2").metric("shared_destination_tag"), Some(&Amount::from_int(104398)));
        assert!(!get("rLone").is_flagged());
    }

    #[test]
    fn accumulator_merges() {
        let a = Action::new(ChainId::Xrpl, "t", "rA", "rB", "Payment").failed("tecPATH_DRY");
        let mut x = SpamAccumulator::default();
        let mut y = SpamAccumulator::default();
        x.add(&a);
        y.add(&a);
        y.add(&Action::new(ChainId::Xrpl, "u", "rA", "rB", "OfferCreate"));
        x.merge(y);
        let acct = &x.accounts["rA"];
        assert_eq!((acct.total, acct.failed, acct.by_type["Payment"]), (3, 2, 2));
    }
}
