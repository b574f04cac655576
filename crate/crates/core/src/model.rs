//! Chain-agnostic block and action model.
//!
//! Every chain adapter normalizes its raw node documents into [`Block`]s and
//! [`Action`]s; every processor consumes only these types.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::decimal::Amount;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ChainId {
    Eosio,
    Tezos,
    Xrpl,
}

impl ChainId {
    pub const ALL: [ChainId; 3] = [ChainId::Eosio, ChainId::Tezos, ChainId::Xrpl];

    /// Prefix used in archive chunk file names (`eos_blocks-1-10.jsonl.gz`).
    pub fn file_tag(self) -> &'static str {
        match self {
            ChainId::Eosio => "eos",
            ChainId::Tezos => "tezos",
            ChainId::Xrpl => "xrp",
        }
    }

    /// Ticker of the chain's native currency.
    pub fn native_currency(self) -> &'static str {
        match self {
            ChainId::Eosio => "EOS",
            ChainId::Tezos => "XTZ",
            ChainId::Xrpl => "XRP",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ChainId::Eosio => "EOSIO",
            ChainId::Tezos => "TEZOS",
            ChainId::Xrpl => "XRPL",
        }
    }
}

impl fmt::Display for ChainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("unknown chain {0:?} (expected eos, tezos or xrp)")]
pub struct UnknownChain(pub String);

impl FromStr for ChainId {
    type Err = UnknownChain;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "eos" | "eosio" => Ok(ChainId::Eosio),
            "tezos" | "xtz" => Ok(ChainId::Tezos),
            "xrp" | "xrpl" => Ok(ChainId::Xrpl),
            _ => Err(UnknownChain(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ActionCategory {
    PeerToPeer,
    Account,
    Consensus,
    Dex,
    Gambling,
    Token,
    Other,
}

/// Coarse grouping used by the published action-type distribution table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TableGroup {
    PeerToPeer,
    AccountActions,
    OtherActions,
}

impl ActionCategory {
    pub const ALL: [ActionCategory; 7] = [
        ActionCategory::PeerToPeer,
        ActionCategory::Account,
        ActionCategory::Consensus,
        ActionCategory::Dex,
        ActionCategory::Gambling,
        ActionCategory::Token,
        ActionCategory::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActionCategory::PeerToPeer => "PEER_TO_PEER",
            ActionCategory::Account => "ACCOUNT",
            ActionCategory::Consensus => "CONSENSUS",
            ActionCategory::Dex => "DEX",
            ActionCategory::Gambling => "GAMBLING",
            ActionCategory::Token => "TOKEN",
            ActionCategory::Other => "OTHER",
        }
    }

    /// Token transfers are value transfers between peers; everything that is
    /// neither a transfer nor account management lands in "other actions".
    pub fn table_group(self) -> TableGroup {
        match self {
            ActionCategory::PeerToPeer | ActionCategory::Token => TableGroup::PeerToPeer,
            ActionCategory::Account => TableGroup::AccountActions,
            _ => TableGroup::OtherActions,
        }
    }
}

impl fmt::Display for ActionCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActionCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ActionCategory::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown action category {s:?}"))
    }
}

pub type Payload = serde_json::Map<String, serde_json::Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub chain: ChainId,
    pub tx_id: String,
    pub sender: String,
    pub receiver: String,
    pub name: String,
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_code: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amount: Option<Amount>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub currency: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub issuer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub destination_tag: Option<u64>,
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub payload: Payload,
}

impl Action {
    /// A successful action with no value fields.
    pub fn new(chain: ChainId, tx_id: &str, sender: &str, receiver: &str, name: &str) -> Self {
        Action {
            chain,
            tx_id: tx_id.to_string(),
            sender: sender.to_string(),
            receiver: receiver.to_string(),
            name: name.to_string(),
            success: true,
            error_code: None,
            amount: None,
            currency: None,
            issuer: None,
            destination_tag: None,
            payload: Payload::new(),
        }
    }

    pub fn with_amount(mut self, amount: Amount, currency: &str, issuer: Option<&str>) -> Self {
        self.amount = Some(amount);
        self.currency = Some(currency.to_string());
        self.issuer = issuer.map(str::to_string);
        self
    }

    pub fn failed(mut self, code: &str) -> Self {
        self.success = false;
        self.error_code = Some(code.to_string());
        self
    }

    pub fn payload_str(&self, key: &str) -> Option<&str> {
        self.payload.get(key).and_then(|v| v.as_str())
    }

    pub fn is_native_currency(&self) -> bool {
        self.currency.as_deref() == Some(self.chain.native_currency()) && self.issuer.is_none()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.name.is_empty() {
            return Err(ModelError::EmptyActionName { tx_id: self.tx_id.clone() });
        }
        if self.success && self.error_code.is_some() {
            return Err(ModelError::ErrorCodeOnSuccess { tx_id: self.tx_id.clone() });
        }
        if self.issuer.is_some() && self.currency.as_deref().map_or(true, |c| c == self.chain.native_currency()) {
            return Err(ModelError::NativeIssuer { tx_id: self.tx_id.clone() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub chain: ChainId,
    pub height: u64,
    pub timestamp: DateTime<Utc>,
    pub tx_count: u64,
    pub actions: Vec<Action>,
}

impl Block {
    pub fn empty(chain: ChainId, height: u64, timestamp: DateTime<Utc>) -> Self {
        Block { chain, height, timestamp: truncate_to_second(timestamp), tx_count: 0, actions: Vec::new() }
    }

    /// Distinct transaction ids referenced by the block's actions.
    pub fn distinct_tx_ids(&self) -> BTreeSet<&str> {
        self.actions.iter().map(|a| a.tx_id.as_str()).collect()
    }

    /// Checks the block invariants. Adapters may also count transactions
    /// whose actions are not listed (EOSIO deferred transactions), so
    /// `tx_count` is only required to cover the listed transactions.
    pub fn validate(&self) -> Result<(), ModelError> {
        let listed = self.distinct_tx_ids().len() as u64;
        if listed > self.tx_count {
            return Err(ModelError::TxCountMismatch { height: self.height, tx_count: self.tx_count, listed });
        }
        for a in &self.actions {
            if a.chain != self.chain {
                return Err(ModelError::MixedChains { height: self.height });
            }
            a.validate()?;
        }
        Ok(())
    }
}

/// Transactions counted towards throughput: one per top-level transaction,
/// however many actions it carries.
pub fn throughput_count(block: &Block) -> u64 {
    block.tx_count
}

pub fn truncate_to_second(ts: DateTime<Utc>) -> DateTime<Utc> {
    Utc.timestamp_opt(ts.timestamp(), 0).single().unwrap_or(ts)
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("action in transaction {tx_id} has an empty name")]
    EmptyActionName { tx_id: String },
    #[error("successful action in transaction {tx_id} carries an error code")]
    ErrorCodeOnSuccess { tx_id: String },
    #[error("action in transaction {tx_id} has an issuer for a native currency")]
    NativeIssuer { tx_id: String },
    #[error("block {height}: tx_count {tx_count} is less than the {listed} transactions listed")]
    TxCountMismatch { height: u64, tx_count: u64, listed: u64 },
    #[error("block {height} mixes actions from several chains")]
    MixedChains { height: u64 },
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts() -> DateTime<Utc> {
        "2019-10-01T00:00:00Z".parse().unwrap()
    }

    fn block_with(actions: Vec<Action>, tx_count: u64) -> Block {
        Block { chain: ChainId::Eosio, height: 1, timestamp: ts(), tx_count, actions }
    }

    #[test]
    fn multi_action_transaction_counts_once() {
        let actions = (0..3).map(|_| Action::new(ChainId::Eosio, "t1", "a", "eosio.token", "transfer")).collect();
        let b = block_with(actions, 1);
        b.validate().unwrap();
        assert_eq!(throughput_count(&b), 1);
    }

    #[test]
    fn empty_block_counts_zero() {
        assert_eq!(throughput_count(&Block::empty(ChainId::Tezos, 5, ts())), 0);
    }

    #[test]
    fn single_action_transactions_count_individually() {
        let actions: Vec<_> =
            (0..5).map(|i| Action::new(ChainId::Eosio, &format!("t{i}"), "a", "b", "transfer")).collect();
        let b = block_with(actions, 5);
        b.validate().unwrap();
        assert_eq!(throughput_count(&b), b.distinct_tx_ids().len() as u64);
    }

    #[test]
    fn invariant_violations_are_reported() {
        let empty_name = Action::new(ChainId::Eosio, "t", "a", "b", "");
        assert!(matches!(empty_name.validate(), Err(ModelError::EmptyActionName { .. })));

        let mut code = Action::new(ChainId::Xrpl, "t", "a", "b", "Payment");
        code.error_code = Some("tecPATH_DRY".into());
        assert!(matches!(code.validate(), Err(ModelError::ErrorCodeOnSuccess { .. })));

        let native = Action::new(ChainId::Xrpl, "t", "a", "b", "Payment").with_amount(Amount::from_int(1), "XRP", Some("rX"));
        assert!(matches!(native.validate(), Err(ModelError::NativeIssuer { .. })));

        let iou = Action::new(ChainId::Xrpl, "t", "a", "b", "Payment").with_amount(Amount::from_int(1), "BTC", Some("rX"));
        iou.validate().unwrap();

        let b = block_with(vec![Action::new(ChainId::Eosio, "t1", "a", "b", "x")], 0);
        assert!(matches!(b.validate(), Err(ModelError::TxCountMismatch { .. })));
    }

    #[test]
    fn chain_names_parse() {
        assert_eq!("eos".parse::<ChainId>().unwrap(), ChainId::Eosio);
        assert_eq!("XRPL".parse::<ChainId>().unwrap(), ChainId::Xrpl);
        assert!("btc".parse::<ChainId>().is_err());
        assert_eq!(ChainId::Tezos.file_tag(), "tezos");
    }

    #[test]
    fn categories_group_like_the_table() {
        assert_eq!(ActionCategory::Token.table_group(), TableGroup::PeerToPeer);
        assert_eq!(ActionCategory::Dex.table_group(), TableGroup::OtherActions);
        assert_eq!(ActionCategory::Consensus.table_group(), TableGroup::OtherActions);
        assert_eq!("dex".parse::<ActionCategory>().unwrap(), ActionCategory::Dex);
    }
}
