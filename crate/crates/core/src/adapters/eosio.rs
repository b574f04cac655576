//! EOSIO `get_block` documents.
//!
//! Field mapping: the sender is the first authorization actor, the receiver is
//! the contract account the action is dispatched to. Token `quantity` fields
//! ("1.0000 EOS") become amount and currency; the action data is kept in the
//! payload so `from`/`to` of token transfers stay available.

use chrono::{DateTime, NaiveDateTime, Utc};
use serde_json::Value;

use super::{str_field, u64_field, ParseError};
use crate::decimal::Amount;
use crate::model::{truncate_to_second, Action, Block, ChainId, Payload};

const CHAIN: ChainId = ChainId::Eosio;

/// Contract holding the native EOS token.
pub const SYSTEM_TOKEN_CONTRACT: &str = "eosio.token";

pub(crate) fn parse(doc: &Value) -> Result<Block, ParseError> {
    let height = u64_field(doc, "block_num").ok_or_else(|| ParseError::malformed(CHAIN, "missing block_num"))?;
    let ts = str_field(doc, "timestamp").ok_or_else(|| ParseError::malformed(CHAIN, "missing timestamp"))?;
    let timestamp = parse_timestamp(ts).ok_or_else(|| ParseError::malformed(CHAIN, format!("bad timestamp {ts:?}")))?;
    let txs = doc
        .get("transactions")
        .and_then(Value::as_array)
        .ok_or_else(|| ParseError::malformed(CHAIN, "missing transactions"))?;

    let mut actions = Vec::new();
    for tx in txs {
        let status = str_field(tx, "status").unwrap_or("executed");
        let trx = tx.get("trx").ok_or_else(|| ParseError::malformed(CHAIN, "transaction without trx"))?;
        // Deferred transactions only carry their id; they count towards
        // throughput but expose no actions.
        let Some(trx_obj) = trx.as_object() else { continue };
        let tx_id = trx_obj.get("id").and_then(Value::as_str).unwrap_or_default();
        let Some(list) = trx_obj
            .get("transaction")
            .and_then(|t| t.get("actions"))
            .and_then(Value::as_array)
        else {
            continue;
        };
        for raw in list {
            actions.push(parse_action(raw, tx_id, status)?);
        }
    }

    Ok(Block { chain: CHAIN, height, timestamp, tx_count: txs.len() as u64, actions })
}

fn parse_action(raw: &Value, tx_id: &str, status: &str) -> Result<Action, ParseError> {
    let account = str_field(raw, "account").ok_or_else(|| ParseError::malformed(CHAIN, "action without account"))?;
    let name = str_field(raw, "name").filter(|n| !n.is_empty()).ok_or_else(|| ParseError::malformed(CHAIN, "action without name"))?;
    let sender = raw
        .get("authorization")
        .and_then(Value::as_array)
        .and_then(|a| a.first())
        .and_then(|auth| str_field(auth, "actor"))
        .unwrap_or_default();

    let mut action = Action::new(CHAIN, tx_id, sender, account, name);
    if status != "executed" {
        action = action.failed(status);
    }

    let mut payload = Payload::new();
    match raw.get("data") {
        Some(Value::Object(data)) => {
            if let Some((amount, symbol)) = data.get("quantity").and_then(Value::as_str).and_then(parse_asset) {
                let native = account == SYSTEM_TOKEN_CONTRACT && symbol == CHAIN.native_currency();
                action = action.with_amount(amount, &symbol, if native { None } else { Some(account) });
            }
            payload.extend(data.iter().map(|(k, v)| (k.clone(), v.clone())));
        }
        Some(other) => {
            payload.insert("data".into(), other.clone());
        }
        None => {}
    }
    if let Value::Object(obj) = raw {
        for (k, v) in obj {
            if !matches!(k.as_str(), "account" | "name" | "authorization" | "data" | "hex_data") && !payload.contains_key(k) {
                payload.insert(k.clone(), v.clone());
            }
        }
    }
    action.payload = payload;
    Ok(action)
}

/// Parses an EOSIO asset string such as `"1.0000 EOS"`.
pub fn parse_asset(s: &str) -> Option<(Amount, String)> {
    let (qty, sym) = s.trim().split_once(' ')?;
    let sym = sym.trim();
    if sym.is_empty() {
        return None;
    }
    Some((qty.parse().ok()?, sym.to_string()))
}

/// Accepts RFC 3339 and the zone-less `2019-10-01T00:00:00.500` form used by
/// EOSIO nodes (which is UTC). Sub-second precision is dropped.
pub(crate) fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(truncate_to_second(dt.with_timezone(&Utc)));
    }
    NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S%.f")
        .ok()
        .map(|n| truncate_to_second(n.and_utc()))
}
