//! Per-chain parsing, classification and fetching.

pub mod eosio;
pub mod fetch;
pub mod rules;
pub mod tezos;
pub mod xrpl;

use serde_json::Value;

use crate::model::{Block, ChainId};

pub use fetch::{fetch_blocks, BlockSource, EndpointSpec, FetchError, FetchSummary, RetryPolicy, Transport};
pub use rules::{classify_action, ClassificationRules, RulesError};

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("malformed {chain} block: {reason}")]
    MalformedBlock { chain: ChainId, reason: String },
    #[error("document is not a {expected} block (looks like {found})")]
    ChainMismatch { expected: ChainId, found: ChainId },
}

impl ParseError {
    pub(crate) fn malformed(chain: ChainId, reason: impl Into<String>) -> Self {
        ParseError::MalformedBlock { chain, reason: reason.into() }
    }
}

/// Parses one stored block line into a normalized [`Block`].
pub fn parse_block(chain: ChainId, raw_line: &[u8]) -> Result<Block, ParseError> {
    let doc: Value =
        serde_json::from_slice(raw_line).map_err(|e| ParseError::malformed(chain, format!("invalid JSON: {e}")))?;
    if let Some(found) = detect_chain(&doc) {
        if found != chain {
            return Err(ParseError::ChainMismatch { expected: chain, found });
        }
    }
    match chain {
        ChainId::Eosio => eosio::parse(&doc),
        ChainId::Tezos => tezos::parse(&doc),
        ChainId::Xrpl => xrpl::parse(&doc),
    }
}

/// Guesses which chain produced a document from its distinctive top-level keys.
pub fn detect_chain(doc: &Value) -> Option<ChainId> {
    let obj = doc.as_object()?;
    if obj.contains_key("block_num") && obj.contains_key("transactions") {
        Some(ChainId::Eosio)
    } else if obj.contains_key("header") && obj.contains_key("operations") {
        Some(ChainId::Tezos)
    } else if xrpl::ledger_object(doc).is_some() {
        Some(ChainId::Xrpl)
    } else {
        None
    }
}

/// Extracts only the block height from a stored line.
pub fn peek_height(chain: ChainId, raw_line: &[u8]) -> Result<u64, ParseError> {
    use serde::Deserialize;

    #[derive(Deserialize)]
    struct Eos {
        block_num: u64,
    }
    #[derive(Deserialize)]
    struct TezosHeader {
        level: u64,
    }
    #[derive(Deserialize)]
    struct Tezos {
        header: TezosHeader,
    }
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Index {
        Num(u64),
        Str(String),
    }
    #[derive(Deserialize)]
    struct Ledger {
        ledger_index: Index,
    }
    #[derive(Deserialize)]
    struct XrpResult {
        ledger: Ledger,
    }
    #[derive(Deserialize)]
    struct Xrp {
        result: Option<XrpResult>,
        ledger: Option<Ledger>,
        ledger_index: Option<Index>,
    }

    let bad = |e: serde_json::Error| ParseError::malformed(chain, format!("cannot read height: {e}"));
    match chain {
        ChainId::Eosio => serde_json::from_slice::<Eos>(raw_line).map(|b| b.block_num).map_err(bad),
        ChainId::Tezos => serde_json::from_slice::<Tezos>(raw_line).map(|b| b.header.level).map_err(bad),
        ChainId::Xrpl => {
            let doc: Xrp = serde_json::from_slice(raw_line).map_err(bad)?;
            let idx = doc
                .result
                .map(|r| r.ledger.ledger_index)
                .or(doc.ledger.map(|l| l.ledger_index))
                .or(doc.ledger_index)
                .ok_or_else(|| ParseError::malformed(chain, "missing ledger_index"))?;
            match idx {
                Index::Num(n) => Ok(n),
                Index::Str(s) => s.parse().map_err(|_| ParseError::malformed(chain, format!("bad ledger_index {s:?}"))),
            }
        }
    }
}

pub(crate) fn str_field<'a>(v: &'a Value, key: &str) -> Option<&'a str> {
    v.get(key).and_then(Value::as_str)
}

/// Accepts both JSON numbers and numeric strings.
pub(crate) fn u64_field(v: &Value, key: &str) -> Option<u64> {
    match v.get(key)? {
        Value::Number(n) => n.as_u64(),
        Value::String(s) => s.parse().ok(),
        _ => None,
    }
}
