//! Time-window parsing and epoch-aligned bucketing.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A positive span of whole seconds, written like `6h`, `30m`, `1d`, `90s`
/// or `2w`. A bare number is taken as seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Window {
    secs: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid duration {0:?}: expected a positive number followed by s, m, h, d or w")]
pub struct WindowError(pub String);

impl Window {
    pub fn from_secs(secs: i64) -> Result<Self, WindowError> {
        if secs > 0 {
            Ok(Window { secs })
        } else {
            Err(WindowError(secs.to_string()))
        }
    }

    pub fn hours(h: i64) -> Self {
        Window { secs: h * 3600 }
    }

    pub fn secs(self) -> i64 {
        self.secs
    }

    /// Start (epoch seconds) of the window containing `ts`; windows are
    /// aligned on the Unix epoch.
    pub fn start_of(self, ts: DateTime<Utc>) -> i64 {
        ts.timestamp().div_euclid(self.secs) * self.secs
    }
}

impl FromStr for Window {
    type Err = WindowError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let err = || WindowError(s.to_string());
        let split = t.find(|c: char| !c.is_ascii_digit()).unwrap_or(t.len());
        let (num, unit) = t.split_at(split);
        let n: i64 = num.parse().map_err(|_| err())?;
        let mult = match unit {
            "" | "s" => 1,
            "m" => 60,
            "h" => 3600,
            "d" => 86_400,
            "w" => 7 * 86_400,
            _ => return Err(err()),
        };
        n.checked_mul(mult).ok_or_else(err).and_then(|secs| Window::from_secs(secs).map_err(|_| err()))
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (unit, size) in [("w", 7 * 86_400), ("d", 86_400), ("h", 3600), ("m", 60)] {
            if self.secs % size == 0 {
                return write!(f, "{}{unit}", self.secs / size);
            }
        }
        write!(f, "{}s", self.secs)
    }
}

impl Serialize for Window {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Window {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(s: &str) -> DateTime<Utc> {
        DateTime::parse_from_rfc3339(s).unwrap().with_timezone(&Utc)
    }

    #[test]
    fn parses_units() {
        assert_eq!("6h".parse::<Window>().unwrap().secs(), 21_600);
        assert_eq!("30m".parse::<Window>().unwrap().secs(), 1_800);
        assert_eq!("1d".parse::<Window>().unwrap().secs(), 86_400);
        assert_eq!("90".parse::<Window>().unwrap().secs(), 90);
        for bad in ["0h", "-1h", "h", "6x", "", "1.5h"] {
            assert!(bad.parse::<Window>().is_err(), "{bad}");
        }
        assert_eq!(Window::hours(6).to_string(), "6h");
        assert_eq!(Window::from_secs(90).unwrap().to_string(), "90s");
    }

    #[test]
    fn six_hour_buckets() {
        let w = Window::hours(6);
        assert_eq!(w.start_of(at("2019-10-01T00:01:00Z")), w.start_of(at("2019-10-01T05:59:00Z")));
        assert_eq!(w.start_of(at("2019-10-01T05:59:00Z")) + 21_600, w.start_of(at("2019-10-01T06:00:00Z")));
        assert_eq!(w.start_of(at("1969-12-31T23:00:00Z")), -21_600);
    }
}
