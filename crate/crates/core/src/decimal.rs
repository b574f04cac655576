//! Exact fixed-point decimal amounts.
//!
//! Every amount is stored as an integer count of 10^-18 units, so sums and
//! differences are exact. Multiplication rounds half away from zero back to
//! 18 fractional digits.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Number of fractional digits kept by [`Amount`].
pub const SCALE: u32 = 18;

fn unit() -> BigInt {
    BigInt::from(10u8).pow(SCALE)
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("invalid decimal {0:?}")]
pub struct ParseAmountError(pub String);

#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Amount(BigInt);

impl Amount {
    pub fn zero() -> Self {
        Amount(BigInt::zero())
    }

    pub fn from_int(v: i64) -> Self {
        Amount(BigInt::from(v) * unit())
    }

    /// `mantissa * 10^-exponent`, e.g. `from_scaled(1_000_000, 6)` is 1.
    pub fn from_scaled(mantissa: i128, exponent: u32) -> Self {
        let m = BigInt::from(mantissa);
        if exponent <= SCALE {
            Amount(m * BigInt::from(10u8).pow(SCALE - exponent))
        } else {
            Amount(div_round(&m, &BigInt::from(10u8).pow(exponent - SCALE)))
        }
    }

    /// Raw count of 10^-18 units.
    pub fn raw(&self) -> &BigInt {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn abs(&self) -> Amount {
        Amount(self.0.abs())
    }

    pub fn to_rational(&self) -> BigRational {
        BigRational::new(self.0.clone(), unit())
    }

    /// Rounds a rational to the nearest representable amount (half away from zero).
    pub fn from_rational(r: &BigRational) -> Amount {
        let scaled = r.numer() * unit();
        Amount(div_round(&scaled, r.denom()))
    }

    /// Exact `self / other`, `None` when `other` is zero.
    pub fn ratio(&self, other: &Amount) -> Option<BigRational> {
        if other.is_zero() {
            None
        } else {
            Some(BigRational::new(self.0.clone(), other.0.clone()))
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.to_rational().to_f64().unwrap_or(f64::NAN)
    }

    /// Formats with exactly `places` fractional digits, rounding half away from zero.
    pub fn to_fixed(&self, places: u32) -> String {
        let places = places.min(SCALE);
        let divisor = BigInt::from(10u8).pow(SCALE - places);
        let rounded = div_round(&self.0, &divisor);
        format_scaled(&rounded, places, false)
    }
}

/// Integer division rounding half away from zero.
fn div_round(n: &BigInt, d: &BigInt) -> BigInt {
    let (q, r) = n.abs().div_rem(&d.abs());
    let q = if r * 2u8 >= d.abs() { q + 1u8 } else { q };
    if (n.sign() == Sign::Minus) ^ (d.sign() == Sign::Minus) {
        -q
    } else {
        q
    }
}

fn format_scaled(v: &BigInt, places: u32, trim: bool) -> String {
    let digits = v.abs().to_string();
    let places = places as usize;
    let padded = if digits.len() <= places {
        format!("{}{}", "0".repeat(places + 1 - digits.len()), digits)
    } else {
        digits
    };
    let (int_part, frac_part) = padded.split_at(padded.len() - places);
    let frac = if trim { frac_part.trim_end_matches('0') } else { frac_part };
    let sign = if v.is_negative() { "-" } else { "" };
    if frac.is_empty() {
        format!("{sign}{int_part}")
    } else {
        format!("{sign}{int_part}.{frac}")
    }
}

impl FromStr for Amount {
    type Err = ParseAmountError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseAmountError(s.to_string());
        let t = s.trim();
        let (mantissa, exp) = match t.find(['e', 'E']) {
            Some(i) => {
                let e: i64 = t[i + 1..].parse().map_err(|_| err())?;
                (&t[..i], e)
            }
            None => (t, 0),
        };
        let (negative, body) = match mantissa.as_bytes().first() {
            Some(b'-') => (true, &mantissa[1..]),
            Some(b'+') => (false, &mantissa[1..]),
            _ => (false, mantissa),
        };
        let (int_digits, frac_digits) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if int_digits.is_empty() && frac_digits.is_empty() {
            return Err(err());
        }
        if !int_digits.bytes().chain(frac_digits.bytes()).all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let all = format!("{int_digits}{frac_digits}");
        let m: BigInt = if all.is_empty() { BigInt::zero() } else { all.parse().map_err(|_| err())? };
        // value = m * 10^(exp - frac_len); stored = value * 10^SCALE
        let shift = exp - frac_digits.len() as i64 + SCALE as i64;
        if shift.abs() > 4096 {
            return Err(err());
        }
        let raw = if shift >= 0 {
            m * BigInt::from(10u8).pow(shift as u32)
        } else {
            div_round(&m, &BigInt::from(10u8).pow((-shift) as u32))
        };
        Ok(Amount(if negative { -raw } else { raw }))
    }
}

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_scaled(&self.0, SCALE, true))
    }
}

impl fmt::Debug for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Amount({self})")
    }
}

impl From<i64> for Amount {
    fn from(v: i64) -> Self {
        Amount::from_int(v)
    }
}

impl Add for Amount {
    type Output = Amount;
    fn add(self, rhs: Amount) -> Amount {
        Amount(self.0 + rhs.0)
    }
}

impl<'a> Add<&'a Amount> for &'a Amount {
    type Output = Amount;
    fn add(self, rhs: &Amount) -> Amount {
        Amount(&self.0 + &rhs.0)
    }
}

impl AddAssign<&Amount> for Amount {
    fn add_assign(&mut self, rhs: &Amount) {
        self.0 += &rhs.0;
    }
}

impl AddAssign for Amount {
    fn add_assign(&mut self, rhs: Amount) {
        self.0 += rhs.0;
    }
}

impl Sub for Amount {
    type Output = Amount;
    fn sub(self, rhs: Amount) -> Amount {
        Amount(self.0 - rhs.0)
    }
}

impl<'a> Sub<&'a Amount> for &'a Amount {
    type Output = Amount;
    fn sub(self, rhs: &Amount) -> Amount {
        Amount(&self.0 - &rhs.0)
    }
}

impl SubAssign<&Amount> for Amount {
    fn sub_assign(&mut self, rhs: &Amount) {
        self.0 -= &rhs.0;
    }
}

impl Neg for Amount {
    type Output = Amount;
    fn neg(self) -> Amount {
        Amount(-self.0)
    }
}

impl<'a> Mul<&'a Amount> for &'a Amount {
    type Output = Amount;
    fn mul(self, rhs: &Amount) -> Amount {
        Amount(div_round(&(&self.0 * &rhs.0), &unit()))
    }
}

impl Mul for Amount {
    type Output = Amount;
    fn mul(self, rhs: Amount) -> Amount {
        &self * &rhs
    }
}

impl Sum for Amount {
    fn sum<I: Iterator<Item = Amount>>(iter: I) -> Amount {
        iter.fold(Amount::zero(), |a, b| a + b)
    }
}

impl<'a> Sum<&'a Amount> for Amount {
    fn sum<I: Iterator<Item = &'a Amount>>(iter: I) -> Amount {
        let mut acc = Amount::zero();
        for a in iter {
            acc += a;
        }
        acc
    }
}

impl Serialize for Amount {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Amount {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Str(String),
            Int(i64),
            Float(f64),
        }
        match Repr::deserialize(d)? {
            Repr::Str(s) => s.parse().map_err(serde::de::Error::custom),
            Repr::Int(i) => Ok(Amount::from_int(i)),
            Repr::Float(f) => f.to_string().parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Rounds a non-negative rational half-up to `places` decimals and formats it.
pub fn format_ratio(r: &BigRational, places: u32) -> String {
    let scale = BigInt::from(10u8).pow(places);
    let scaled = div_round(&(r.numer() * &scale), r.denom());
    format_scaled(&scaled, places, false)
}

/// Compares `r` against a decimal threshold exactly.
pub fn cmp_ratio(r: &BigRational, threshold: &Amount) -> Ordering {
    r.cmp(&threshold.to_rational())
}

pub fn rational_one() -> BigRational {
    BigRational::one()
}
