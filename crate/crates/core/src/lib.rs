//! Multi-chain transaction analytics: fetch, archive, classify and aggregate
//! block data from EOSIO, Tezos and the XRP Ledger.

pub mod accounts;
pub mod adapters;
pub mod anomaly;
pub mod decimal;
pub mod export;
pub mod model;
pub mod processors;
pub mod storage;
pub mod synth;
pub mod throughput;

pub use adapters::{classify_action, parse_block, ClassificationRules, ParseError};
pub use decimal::Amount;
pub use model::{throughput_count, Action, ActionCategory, Block, ChainId};
