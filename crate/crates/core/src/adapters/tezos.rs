//! Tezos block RPC documents (`/chains/main/blocks/<level>`).
//!
//! Each operation is one transaction; its `contents` are the actions. The
//! sender is the operation source, or the endorsing delegate for
//! endorsements. The receiver is the destination (or the chosen delegate for
//! delegations), empty for consensus operations.

use serde_json::Value;

use super::eosio::parse_timestamp;
use super::{str_field, ParseError};
use crate::decimal::Amount;
use crate::model::{Action, Block, ChainId, Payload};

const CHAIN: ChainId = ChainId::Tezos;

pub(crate) fn parse(doc: &Value) -> Result<Block, ParseError> {
    let header = doc.get("header").ok_or_else(|| ParseError::malformed(CHAIN, "missing header"))?;
    let height = super::u64_field(header, "level").ok_or_else(|| ParseError::malformed(CHAIN, "missing header.level"))?;
    let ts = str_field(header, "timestamp").ok_or_else(|| ParseError::malformed(CHAIN, "missing header.timestamp"))?;
    let timestamp = parse_timestamp(ts).ok_or_else(|| ParseError::malformed(CHAIN, format!("bad timestamp {ts:?}")))?;
    let groups = doc
        .get("operations")
        .and_then(Value::as_array)
        .ok_or_else(|| ParseError::malformed(CHAIN, "missing operations"))?;

    let mut tx_count = 0u64;
    let mut actions = Vec::new();
    for group in groups {
        let ops = group.as_array().ok_or_else(|| ParseError::malformed(CHAIN, "operation group is not a list"))?;
        for op in ops {
            tx_count += 1;
            let hash = str_field(op, "hash").unwrap_or_default();
            let contents = op
                .get("contents")
                .and_then(Value::as_array)
                .ok_or_else(|| ParseError::malformed(CHAIN, "operation without contents"))?;
            for content in contents {
                actions.push(parse_content(content, hash)?);
            }
        }
    }
    Ok(Block { chain: CHAIN, height, timestamp, tx_count, actions })
}

fn parse_content(c: &Value, hash: &str) -> Result<Action, ParseError> {
    let kind = str_field(c, "kind").filter(|k| !k.is_empty()).ok_or_else(|| ParseError::malformed(CHAIN, "content without kind"))?;
    let metadata = c.get("metadata");
    let sender = str_field(c, "source")
        .or_else(|| metadata.and_then(|m| str_field(m, "delegate")))
        .or_else(|| str_field(c, "pkh"))
        .unwrap_or_default();
    let receiver = match kind {
        "delegation" => str_field(c, "delegate").unwrap_or_default(),
        _ => str_field(c, "destination").unwrap_or_default(),
    };
    let mut action = Action::new(CHAIN, hash, sender, receiver, kind);

    if let Some(result) = metadata.and_then(|m| m.get("operation_result")) {
        let status = str_field(result, "status").unwrap_or("applied");
        if status != "applied" {
            let code = result
                .get("errors")
                .and_then(Value::as_array)
                .and_then(|e| e.first())
                .and_then(|e| str_field(e, "id"))
                .unwrap_or(status);
            action = action.failed(code);
        }
    }

    if kind == "transaction" {
        if let Some(mutez) = str_field(c, "amount").and_then(|s| s.parse::<i128>().ok()) {
            action = action.with_amount(Amount::from_scaled(mutez, 6), CHAIN.native_currency(), None);
        }
    }

    let mut payload = Payload::new();
    if let Value::Object(obj) = c {
        for (k, v) in obj {
            if !matches!(k.as_str(), "kind" | "source" | "destination" | "amount" | "metadata") {
                payload.insert(k.clone(), v.clone());
            }
        }
    }
    action.payload = payload;
    Ok(action)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::parse_block;
    use serde_json::json;

    fn endorsement(i: usize) -> Value {
        json!({
            "protocol": "PsBabyM1eUXZseaJdmXFApDSBqj8YBfwELoxZHHW77EMcAbbwAS",
            "hash": format!("oo{i:04}"),
            "branch": "BLx",
            "contents": [{"kind": "endorsement", "level": 700000, "metadata": {"delegate": format!("tz1baker{i}"), "slots": [i]}}],
            "signature": "sig"
        })
    }

    fn transaction(i: usize, status: &str) -> Value {
        json!({
            "hash": format!("op{i}"),
            "contents": [{
                "kind": "transaction", "source": "tz1sender", "fee": "1420", "counter": "1",
                "amount": "2500000", "destination": format!("tz1dest{i}"),
                "metadata": {"operation_result": {"status": status}}
            }]
        })
    }

    #[test]
    fn endorsements_and_transactions() {
        let doc = json!({
            "protocol": "PsBabyM1", "hash": "BLock",
            "header": {"level": 700001, "timestamp": "2019-11-01T00:00:30Z"},
            "operations": [(0..32).map(endorsement).collect::<Vec<_>>(), [], [], [transaction(0, "applied"), transaction(1, "failed")]]
        });
        let b = parse_block(ChainId::Tezos, doc.to_string().as_bytes()).unwrap();
        assert_eq!(b.height, 700001);
        assert_eq!(b.tx_count, 34);
        assert_eq!(b.actions.iter().filter(|a| a.name == "endorsement").count(), 32);
        assert_eq!(b.actions[0].sender, "tz1baker0");
        assert_eq!(b.actions[0].receiver, "");
        let t = &b.actions[32];
        assert_eq!(t.amount, Some("2.5".parse().unwrap()));
        assert_eq!(t.currency.as_deref(), Some("XTZ"));
        assert!(t.success);
        assert!(!b.actions[33].success);
        assert_eq!(b.actions[33].error_code.as_deref(), Some("failed"));
        b.validate().unwrap();
    }

    #[test]
    fn empty_operations() {
        let line = r#"{"header":{"level":5,"timestamp":"2019-10-01T00:00:00Z"},"operations":[[],[],[],[]]}"#;
        let b = parse_block(ChainId::Tezos, line.as_bytes()).unwrap();
        assert_eq!((b.tx_count, b.actions.len()), (0, 0));
    }

    #[test]
    fn delegation_receiver_is_the_delegate() {
        let doc = json!({
            "header": {"level": 1, "timestamp": "2019-10-01T00:00:00Z"},
            "operations": [[], [], [], [{"hash": "opd", "contents": [{"kind": "delegation", "source": "KT1x", "delegate": "tz1baker"}]}]]
        });
        let b = parse_block(ChainId::Tezos, doc.to_string().as_bytes()).unwrap();
        assert_eq!(b.actions[0].receiver, "tz1baker");
    }
}
