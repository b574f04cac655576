//! Run manifest written next to the results of every `process` run.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use txstats::ChainId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub processor: String,
    #[serde(rename = "type")]
    pub processor_type: String,
    pub json: String,
    pub json_sha256: String,
    pub csv: String,
    pub csv_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: String,
    pub config_sha256: String,
    pub chain: ChainId,
    pub pattern: String,
    pub start_block: u64,
    pub end_block: u64,
    pub workers: usize,
    pub strict: bool,
    pub allow_gaps: bool,
    pub chunks: usize,
    pub blocks: u64,
    pub actions: u64,
    pub skipped_lines: u64,
    pub missing: Vec<String>,
    pub duration_secs: f64,
    pub outputs: Vec<OutputEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}
