//! XRPL payment valuation: per-issuer exchange rates in XRP, value classes and
//! value flows between entities.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use chrono::NaiveDate;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::accounts::{EntityResolver, Registry};
use crate::decimal::Amount;
use crate::model::{Action, ChainId};

#[derive(Debug, thiserror::Error)]
pub enum RatesError {
    #[error("cannot read rate table {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid rate table CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid rate table JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("negative rate {rate} for {currency}/{issuer}")]
    NegativeRate { currency: String, issuer: String, rate: Amount },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateRow {
    pub currency: String,
    pub issuer: String,
    pub window_start_date: NaiveDate,
    pub rate: Amount,
}

/// (currency, issuer) -> windows sorted by start date, each holding the
/// 30-day average rate in XRP.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RateTable {
    entries: BTreeMap<(String, String), Vec<(NaiveDate, Amount)>>,
}

impl RateTable {
    pub fn from_rows(rows: impl IntoIterator<Item = RateRow>) -> Result<Self, RatesError> {
        let mut t = RateTable::default();
        for r in rows {
            t.insert(&r.currency, &r.issuer, r.window_start_date, r.rate)?;
        }
        Ok(t)
    }

    pub fn insert(&mut self, currency: &str, issuer: &str, window_start: NaiveDate, rate: Amount) -> Result<(), RatesError> {
        if rate.is_negative() {
            return Err(RatesError::NegativeRate { currency: currency.into(), issuer: issuer.into(), rate });
        }
        let windows = self.entries.entry((currency.to_string(), issuer.to_string())).or_default();
        match windows.binary_search_by_key(&window_start, |(d, _)| *d) {
            Ok(i) => windows[i].1 = rate,
            Err(i) => windows.insert(i, (window_start, rate)),
        }
        Ok(())
    }

    /// Rate of the window containing `date`; dates before the first window
    /// use the first. `None` means no rate is known for the token.
    pub fn lookup(&self, currency: &str, issuer: &str, date: NaiveDate) -> Option<&Amount> {
        let windows = self.entries.get(&(currency.to_string(), issuer.to_string()))?;
        let idx = windows.partition_point(|(d, _)| *d <= date);
        windows.get(idx.saturating_sub(1)).map(|(_, r)| r)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn rows(&self) -> Vec<RateRow> {
        self.entries
            .iter()
            .flat_map(|((c, i), w)| {
                w.iter().map(move |(d, r)| RateRow { currency: c.clone(), issuer: i.clone(), window_start_date: *d, rate: r.clone() })
            })
            .collect()
    }

    pub fn from_csv(reader: impl std::io::Read) -> Result<Self, RatesError> {
        let rows = csv::Reader::from_reader(reader).deserialize().collect::<Result<Vec<RateRow>, _>>()?;
        Self::from_rows(rows)
    }

    pub fn from_json(text: &str) -> Result<Self, RatesError> {
        Self::from_rows(serde_json::from_str::<Vec<RateRow>>(text)?)
    }

    /// Loads `.json` files as JSON arrays and anything else as CSV.
    pub fn load(path: &Path) -> Result<Self, RatesError> {
        let io = |source| RatesError::Io { path: path.display().to_string(), source };
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Self::from_json(&std::fs::read_to_string(path).map_err(io)?)
        } else {
            Self::from_csv(std::fs::File::open(path).map_err(io)?)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PaymentClass {
    ValueCarrying,
    ZeroValue,
    UnknownValue,
    Failed,
}

impl PaymentClass {
    pub const ALL: [PaymentClass; 4] =
        [PaymentClass::ValueCarrying, PaymentClass::ZeroValue, PaymentClass::UnknownValue, PaymentClass::Failed];

    pub fn as_str(self) -> &'static str {
        match self {
            PaymentClass::ValueCarrying => "VALUE_CARRYING",
            PaymentClass::ZeroValue => "ZERO_VALUE",
            PaymentClass::UnknownValue => "UNKNOWN_VALUE",
            PaymentClass::Failed => "FAILED",
        }
    }
}

impl fmt::Display for PaymentClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn is_payment(a: &Action) -> bool {
    a.chain == ChainId::Xrpl && a.name == "Payment"
}

/// Classifies a payment made on `date`.
pub fn classify_payment_value(payment: &Action, rates: &RateTable, date: NaiveDate) -> PaymentClass {
    if !payment.success {
        return PaymentClass::Failed;
    }
    let (Some(amount), Some(currency)) = (&payment.amount, &payment.currency) else {
        return PaymentClass::UnknownValue;
    };
    if payment.is_native_currency() {
        return if amount.is_positive() { PaymentClass::ValueCarrying } else { PaymentClass::ZeroValue };
    }
    match rates.lookup(currency, payment.issuer.as_deref().unwrap_or(""), date) {
        None => PaymentClass::UnknownValue,
        Some(r) if r.is_positive() && amount.is_positive() => PaymentClass::ValueCarrying,
        Some(_) => PaymentClass::ZeroValue,
    }
}

/// Value of a successful payment in XRP, when known.
pub fn value_in_xrp(payment: &Action, rates: &RateTable, date: NaiveDate) -> Option<Amount> {
    let amount = payment.amount.as_ref()?;
    if payment.is_native_currency() {
        return Some(amount.clone());
    }
    let rate = rates.lookup(payment.currency.as_deref()?, payment.issuer.as_deref().unwrap_or(""), date)?;
    Some(amount.clone() * rate.clone())
}

/// Mergeable class counts and failure-code statistics over payments.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaymentValueSummary {
    pub total: u64,
    pub classes: BTreeMap<PaymentClass, u64>,
    pub error_codes: BTreeMap<String, u64>,
    pub value_carrying_xrp: Amount,
}

impl PaymentValueSummary {
    pub fn add(&mut self, payment: &Action, rates: &RateTable, date: NaiveDate) -> PaymentClass {
        let class = classify_payment_value(payment, rates, date);
        self.total += 1;
        *self.classes.entry(class).or_default() += 1;
        if let Some(code) = &payment.error_code {
            *self.error_codes.entry(code.clone()).or_default() += 1;
        }
        if class == PaymentClass::ValueCarrying {
            if let Some(v) = value_in_xrp(payment, rates, date) {
                self.value_carrying_xrp += &v;
            }
        }
        class
    }

    pub fn merge(&mut self, other: PaymentValueSummary) {
        self.total += other.total;
        for (k, n) in other.classes {
            *self.classes.entry(k).or_default() += n;
        }
        for (k, n) in other.error_codes {
            *self.error_codes.entry(k).or_default() += n;
        }
        self.value_carrying_xrp += &other.value_carrying_xrp;
    }

    pub fn count(&self, c: PaymentClass) -> u64 {
        self.classes.get(&c).copied().unwrap_or(0)
    }

    pub fn successful(&self) -> u64 {
        self.total - self.count(PaymentClass::Failed)
    }

    /// Value-carrying share of successful payments.
    pub fn value_carrying_share(&self) -> Option<BigRational> {
        let vc = self.count(PaymentClass::ValueCarrying);
        (self.successful() > 0).then(|| BigRational::new(vc.into(), self.successful().into()))
    }

    /// Value-carrying share of successful payments whose value is known
    /// (unknown-rate payments excluded from the denominator).
    pub fn value_carrying_share_of_known(&self) -> Option<BigRational> {
        let vc = self.count(PaymentClass::ValueCarrying);
        let known = vc + self.count(PaymentClass::ZeroValue);
        (known > 0).then(|| BigRational::new(vc.into(), known.into()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FlowRow {
    pub sender_entity: String,
    pub currency: String,
    pub receiver_entity: String,
    pub xrp_value: Amount,
}

/// Aggregated XRP value per (sender entity, currency, receiver entity).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValueFlows {
    pub flows: BTreeMap<(String, String, String), Amount>,
    /// Payments skipped because they were not value carrying.
    pub skipped: u64,
}

impl ValueFlows {
    pub fn add(&mut self, payment: &Action, date: NaiveDate, rates: &RateTable, resolver: &mut EntityResolver<'_>) {
        if classify_payment_value(payment, rates, date) != PaymentClass::ValueCarrying {
            self.skipped += 1;
            return;
        }
        let Some(value) = value_in_xrp(payment, rates, date) else {
            self.skipped += 1;
            return;
        };
        let sender = resolver.resolve(&payment.sender).to_string();
        let receiver = resolver.resolve(&payment.receiver).to_string();
        let currency = payment.currency.clone().unwrap_or_default();
        *self.flows.entry((sender, currency, receiver)).or_default() += &value;
    }

    pub fn merge(&mut self, other: ValueFlows) {
        for (k, v) in other.flows {
            *self.flows.entry(k).or_default() += &v;
        }
        self.skipped += other.skipped;
    }

    pub fn rows(&self) -> Vec<FlowRow> {
        self.flows
            .iter()
            .map(|((s, c, r), v)| FlowRow { sender_entity: s.clone(), currency: c.clone(), receiver_entity: r.clone(), xrp_value: v.clone() })
            .collect()
    }

    pub fn outflows(&self) -> BTreeMap<&str, Amount> {
        let mut out: BTreeMap<&str, Amount> = BTreeMap::new();
        for ((s, _, _), v) in &self.flows {
            *out.entry(s.as_str()).or_default() += v;
        }
        out
    }

    pub fn inflows(&self) -> BTreeMap<&str, Amount> {
        let mut out: BTreeMap<&str, Amount> = BTreeMap::new();
        for ((_, _, r), v) in &self.flows {
            *out.entry(r.as_str()).or_default() += v;
        }
        out
    }
}

pub fn value_flow<'a>(
    payments: impl IntoIterator<Item = (&'a Action, NaiveDate)>,
    rates: &RateTable,
    registry: &Registry,
) -> ValueFlows {
    let mut resolver = EntityResolver::new(registry);
    let mut flows = ValueFlows::default();
    for (p, date) in payments {
        flows.add(p, date, rates, &mut resolver);
    }
    flows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accounts::AccountRecord;

    const BITSTAMP: &str = "rvYAfWj5gh67oV6fW32ZzP3Aw4Eubs59B";

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn iou(issuer: &str, value: &str) -> Action {
        Action::new(ChainId::Xrpl, "h", "rA", "rB", "Payment").with_amount(value.parse().unwrap(), "BTC", Some(issuer))
    }

    fn table() -> RateTable {
        let mut t = RateTable::default();
        t.insert("BTC", BITSTAMP, d("2019-10-01"), Amount::from_int(36_050)).unwrap();
        t.insert("BTC", BITSTAMP, d("2019-10-31"), Amount::from_int(40_000)).unwrap();
        t.insert("BTC", "rZero", d("2019-10-01"), Amount::zero()).unwrap();
        t
    }

    #[test]
    fn classes() {
        let t = table();
        let day = d("2019-10-15");
        assert_eq!(classify_payment_value(&iou(BITSTAMP, "0.1"), &t, day), PaymentClass::ValueCarrying);
        assert_eq!(classify_payment_value(&iou("rZero", "1000"), &t, day), PaymentClass::ZeroValue);
        assert_eq!(classify_payment_value(&iou("rNobody", "1"), &t, day), PaymentClass::UnknownValue);
        assert_eq!(classify_payment_value(&iou(BITSTAMP, "1").failed("tecPATH_DRY"), &t, day), PaymentClass::Failed);
        let xrp = Action::new(ChainId::Xrpl, "h", "rA", "rB", "Payment").with_amount(Amount::from_int(5), "XRP", None);
        assert_eq!(classify_payment_value(&xrp, &t, day), PaymentClass::ValueCarrying);
    }

    #[test]
    fn window_lookup() {
        let t = table();
        assert_eq!(t.lookup("BTC", BITSTAMP, d("2019-01-01")), Some(&Amount::from_int(36_050)));
        assert_eq!(t.lookup("BTC", BITSTAMP, d("2019-10-30")), Some(&Amount::from_int(36_050)));
        assert_eq!(t.lookup("BTC", BITSTAMP, d("2019-10-31")), Some(&Amount::from_int(40_000)));
        assert_eq!(t.lookup("ETH", BITSTAMP, d("2019-10-31")), None);
    }

    #[test]
    fn csv_and_json_tables_agree() {
        let csv = format!("currency,issuer,window_start_date,rate\nBTC,{BITSTAMP},2019-10-01,36050\nBTC,rZero,2019-10-01,0\n");
        let json = format!(r#"[{{"currency":"BTC","issuer":"{BITSTAMP}","window_start_date":"2019-10-01","rate":"36050"}},{{"currency":"BTC","issuer":"rZero","window_start_date":"2019-10-01","rate":0}}]"#);
        assert_eq!(RateTable::from_csv(csv.as_bytes()).unwrap(), RateTable::from_json(&json).unwrap());
        assert!(RateTable::from_json(r#"[{"currency":"X","issuer":"i","window_start_date":"2019-10-01","rate":"-1"}]"#).is_err());
    }

    #[test]
    fn flows_by_entity() {
        let reg = Registry::from_records([
            AccountRecord::new("rHuobi").named("Huobi"),
            AccountRecord::new("rChild").child_of("rHuobi"),
        ])
        .unwrap();
        let pay = |from: &str, to: &str| {
            Action::new(ChainId::Xrpl, "h", from, to, "Payment").with_amount(Amount::from_int(10), "XRP", None)
        };
        let ps = [pay("rA", "rB"), pay("rA", "rB"), pay("rA", "rB"), pay("rChild", "rB")];
        let flows = value_flow(ps.iter().map(|p| (p, d("2019-10-01"))), &RateTable::default(), &reg);
        assert_eq!(flows.flows[&("rA".into(), "XRP".into(), "rB".into())], Amount::from_int(30));
        assert_eq!(flows.flows[&("Huobi-descendant".into(), "XRP".into(), "rB".into())], Amount::from_int(10));
        let out: Amount = flows.outflows().values().sum();
        let inn: Amount = flows.inflows().values().sum();
        assert_eq!(out, inn);
    }
}
