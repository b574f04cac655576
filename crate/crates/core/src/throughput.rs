//! Average and maximum transactions per second.
//!
//! Average TPS divides the transaction count by the length of the
//! observation period. Maximum TPS is the highest per-window count divided by
//! the full window length (6 hours by default), so a partial trailing window
//! is never inflated.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, TimeZone, Utc};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::decimal::{format_ratio, Amount};
use crate::model::ChainId;

pub const MAX_TPS_WINDOW_SECS: i64 = 6 * 3600;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ThroughputError {
    #[error("empty observation window")]
    EmptyWindow,
}

/// Exact transactions-per-second rate; displayed with 2 decimals.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Tps(pub BigRational);

impl Tps {
    pub fn new(count: u64, seconds: u64) -> Self {
        Tps(BigRational::new(BigInt::from(count), BigInt::from(seconds)))
    }

    pub fn zero() -> Self {
        Tps(BigRational::zero())
    }

    pub fn display(&self) -> String {
        format_ratio(&self.0, 2)
    }

    pub fn to_amount(&self) -> Amount {
        Amount::from_rational(&self.0)
    }
}

impl fmt::Display for Tps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display())
    }
}

impl fmt::Debug for Tps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tps({} = {})", self.0, self.display())
    }
}

impl Serialize for Tps {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.display())
    }
}

/// Reads back the 2-decimal form written by `Serialize`.
impl<'de> Deserialize<'de> for Tps {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let a: Amount = String::deserialize(d)?.parse().map_err(serde::de::Error::custom)?;
        Ok(Tps(a.to_rational()))
    }
}

pub fn average_tps(total: u64, start: DateTime<Utc>, end: DateTime<Utc>) -> Result<Tps, ThroughputError> {
    let secs = (end - start).num_seconds();
    if secs <= 0 {
        return Err(ThroughputError::EmptyWindow);
    }
    Ok(Tps::new(total, secs as u64))
}

/// Highest `count / window_secs` over `series` (window start in epoch
/// seconds, count); the earliest window wins ties.
pub fn max_tps(series: &BTreeMap<i64, u64>, window_secs: i64) -> Result<(Tps, DateTime<Utc>), ThroughputError> {
    if window_secs <= 0 {
        return Err(ThroughputError::EmptyWindow);
    }
    let mut best: Option<(i64, u64)> = None;
    for (&start, &count) in series {
        if best.map_or(true, |(_, c)| count > c) {
            best = Some((start, count));
        }
    }
    let (start, count) = best.ok_or(ThroughputError::EmptyWindow)?;
    Ok((Tps::new(count, window_secs as u64), epoch(start)))
}

pub(crate) fn epoch(secs: i64) -> DateTime<Utc> {
    Utc.timestamp_opt(secs, 0).single().expect("timestamp in range")
}

/// Which span divides the transaction count for the average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Denominator {
    /// The configured observation period (or first block to last block + 1 s
    /// when none is configured).
    #[default]
    Calendar,
    /// First block timestamp to last block timestamp.
    Blocks,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThroughputStats {
    pub chain: ChainId,
    pub observation_start: DateTime<Utc>,
    pub observation_end: DateTime<Utc>,
    pub denominator: Denominator,
    pub first_block: Option<u64>,
    pub last_block: Option<u64>,
    pub blocks: u64,
    pub total_transactions: u64,
    pub avg_tps: Tps,
    pub max_tps: Tps,
    pub max_window_start: DateTime<Utc>,
    pub window_secs: i64,
    pub alleged_tps: Option<Amount>,
}

impl ThroughputStats {
    /// `max_tps >= avg_tps` is only guaranteed when a full window lies inside
    /// the observation period.
    pub fn has_full_window(&self) -> bool {
        (self.observation_end - self.observation_start).num_seconds() >= self.window_secs
    }

    pub fn max_vs_avg(&self) -> Ordering {
        self.max_tps.cmp(&self.avg_tps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(s: &str) -> DateTime<Utc> {
        DateTime::parse_from_rfc3339(s).unwrap().with_timezone(&Utc)
    }

    #[test]
    fn observation_period_is_213_days() {
        let (s, e) = (at("2019-10-01T00:00:00Z"), at("2020-05-01T00:00:00Z"));
        assert_eq!((e - s).num_seconds(), 18_403_200);
        assert_eq!(average_tps(7_890_133, s, e).unwrap().display(), "0.43");
        assert_eq!(average_tps(0, s, e).unwrap(), Tps::zero());
    }

    #[test]
    fn one_window_unit() {
        let s = at("2019-10-01T00:00:00Z");
        let e = s + chrono::Duration::seconds(MAX_TPS_WINDOW_SECS);
        assert_eq!(average_tps(21_600, s, e).unwrap().display(), "1.00");
        assert_eq!(average_tps(1, s, s), Err(ThroughputError::EmptyWindow));
    }

    #[test]
    fn max_window_and_ties() {
        let series = BTreeMap::from([(0, 100), (21_600, 2_937_600), (43_200, 50), (64_800, 2_937_600)]);
        let (tps, start) = max_tps(&series, MAX_TPS_WINDOW_SECS).unwrap();
        assert_eq!(tps.display(), "136.00");
        assert_eq!(tps, Tps::new(136, 1));
        assert_eq!(start.timestamp(), 21_600);
        let (tps, start) = max_tps(&BTreeMap::from([(42, 0)]), MAX_TPS_WINDOW_SECS).unwrap();
        assert_eq!((tps, start.timestamp()), (Tps::zero(), 42));
        assert_eq!(max_tps(&BTreeMap::new(), MAX_TPS_WINDOW_SECS), Err(ThroughputError::EmptyWindow));
    }
}
