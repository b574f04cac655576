//! XRPL `ledger` documents (websocket method with `transactions` and
//! `expand` enabled).
//!
//! Every XRPL transaction is a single action. The result code decides
//! success: `tesSUCCESS` is the only successful code, anything else is kept as
//! the error code.

use chrono::{TimeZone, Utc};
use serde_json::Value;

use super::{str_field, u64_field, ParseError};
use crate::decimal::Amount;
use crate::model::{Action, Block, ChainId, Payload};

const CHAIN: ChainId = ChainId::Xrpl;

/// Seconds between the Unix epoch and the Ripple epoch (2000-01-01T00:00:00Z).
pub const RIPPLE_EPOCH_OFFSET: i64 = 946_684_800;

pub const SUCCESS_CODE: &str = "tesSUCCESS";

/// Accepts a full websocket response, a `{"ledger": ..}` wrapper or the bare
/// ledger object.
pub(crate) fn ledger_object(doc: &Value) -> Option<&Value> {
    if let Some(l) = doc.get("result").and_then(|r| r.get("ledger")) {
        return Some(l);
    }
    if let Some(l) = doc.get("ledger").filter(|l| l.is_object()) {
        return Some(l);
    }
    if doc.get("ledger_index").is_some() && (doc.get("close_time").is_some() || doc.get("transactions").is_some()) {
        return Some(doc);
    }
    None
}

pub(crate) fn parse(doc: &Value) -> Result<Block, ParseError> {
    let ledger = ledger_object(doc).ok_or_else(|| ParseError::malformed(CHAIN, "no ledger object"))?;
    let height = u64_field(ledger, "ledger_index").ok_or_else(|| ParseError::malformed(CHAIN, "missing ledger_index"))?;
    let timestamp = match u64_field(ledger, "close_time") {
        Some(secs) => Utc
            .timestamp_opt(secs as i64 + RIPPLE_EPOCH_OFFSET, 0)
            .single()
            .ok_or_else(|| ParseError::malformed(CHAIN, "close_time out of range"))?,
        None => {
            let iso = str_field(ledger, "close_time_iso").ok_or_else(|| ParseError::malformed(CHAIN, "missing close_time"))?;
            super::eosio::parse_timestamp(iso).ok_or_else(|| ParseError::malformed(CHAIN, format!("bad close_time_iso {iso:?}")))?
        }
    };
    let txs = match ledger.get("transactions") {
        Some(Value::Array(t)) => t.as_slice(),
        None => &[],
        Some(_) => return Err(ParseError::malformed(CHAIN, "transactions is not a list")),
    };
    let actions = txs.iter().map(parse_transaction).collect::<Result<Vec<_>, _>>()?;
    Ok(Block { chain: CHAIN, height, timestamp, tx_count: actions.len() as u64, actions })
}

fn parse_transaction(tx: &Value) -> Result<Action, ParseError> {
    if tx.is_string() {
        return Err(ParseError::malformed(CHAIN, "transactions are not expanded"));
    }
    let kind = str_field(tx, "TransactionType")
        .filter(|k| !k.is_empty())
        .ok_or_else(|| ParseError::malformed(CHAIN, "transaction without TransactionType"))?;
    let hash = str_field(tx, "hash").unwrap_or_default();
    let sender = str_field(tx, "Account").unwrap_or_default();
    let receiver = str_field(tx, "Destination").unwrap_or_default();
    let mut action = Action::new(CHAIN, hash, sender, receiver, kind);

    let meta = tx.get("metaData").or_else(|| tx.get("meta"));
    let result = meta.and_then(|m| str_field(m, "TransactionResult")).unwrap_or(SUCCESS_CODE);
    if result != SUCCESS_CODE {
        action = action.failed(result);
    }

    let delivered = meta.and_then(|m| m.get("delivered_amount")).filter(|v| v.as_str() != Some("unavailable"));
    if let Some(amount) = delivered.or_else(|| tx.get("Amount")) {
        let (value, currency, issuer) = parse_amount(amount)?;
        action = action.with_amount(value, &currency, issuer.as_deref());
    }
    action.destination_tag = tx.get("DestinationTag").and_then(Value::as_u64);

    let mut payload = Payload::new();
    if let Value::Object(obj) = tx {
        for (k, v) in obj {
            if !matches!(
                k.as_str(),
                "TransactionType" | "hash" | "Account" | "Destination" | "Amount" | "DestinationTag" | "metaData" | "meta"
            ) {
                payload.insert(k.clone(), v.clone());
            }
        }
    }
    action.payload = payload;
    Ok(action)
}

/// XRP amounts are strings of drops; issued currencies are objects with
/// `currency`, `issuer` and `value`.
pub fn parse_amount(v: &Value) -> Result<(Amount, String, Option<String>), ParseError> {
    match v {
        Value::String(drops) => {
            let d: i128 = drops.parse().map_err(|_| ParseError::malformed(CHAIN, format!("bad drops amount {drops:?}")))?;
            Ok((Amount::from_scaled(d, 6), CHAIN.native_currency().to_string(), None))
        }
        Value::Object(o) => {
            let currency = o.get("currency").and_then(Value::as_str).ok_or_else(|| ParseError::malformed(CHAIN, "amount without currency"))?;
            let value = o
                .get("value")
                .and_then(Value::as_str)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| ParseError::malformed(CHAIN, "amount without numeric value"))?;
            let issuer = o.get("issuer").and_then(Value::as_str).map(str::to_string);
            Ok((value, currency.to_string(), issuer))
        }
        _ => Err(ParseError::malformed(CHAIN, "unsupported amount encoding")),
    }
}
