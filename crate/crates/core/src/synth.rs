//! Seeded synthetic archives and a mock node for tests and benchmarks.
//!
//! Blocks are rendered as the raw node documents the adapters parse, and keep
//! their ground truth so recounts do not have to go through the parser.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use chrono::{DateTime, Duration, Utc};
use rand::{Rng, SeedableRng};
use serde_json::{json, Map, Value};

use crate::decimal::Amount;
use crate::model::ChainId;
use crate::storage::{chunk_file_name, write_chunk, StorageError};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthAction {
    pub sender: String,
    pub receiver: String,
    pub name: String,
    /// Decimal value in whole units of `currency`.
    pub amount: Option<(String, String, Option<String>)>,
    pub error: Option<String>,
    pub destination_tag: Option<u64>,
    /// Extra action data (EOSIO `data`, Tezos content fields, XRPL fields).
    pub data: Map<String, Value>,
}

impl SynthAction {
    pub fn new(sender: &str, receiver: &str, name: &str) -> Self {
        SynthAction {
            sender: sender.into(),
            receiver: receiver.into(),
            name: name.into(),
            amount: None,
            error: None,
            destination_tag: None,
            data: Map::new(),
        }
    }

    pub fn amount(mut self, value: &str, currency: &str, issuer: Option<&str>) -> Self {
        self.amount = Some((value.into(), currency.into(), issuer.map(str::to_string)));
        self
    }

    pub fn failed(mut self, code: &str) -> Self {
        self.error = Some(code.into());
        self
    }

    pub fn tag(mut self, t: u64) -> Self {
        self.destination_tag = Some(t);
        self
    }

    pub fn with(mut self, key: &str, v: Value) -> Self {
        self.data.insert(key.into(), v);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthTx {
    pub id: String,
    pub actions: Vec<SynthAction>,
    /// EOSIO signature and packed transaction hex, rendered when present.
    pub packed: Option<(String, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthBlock {
    pub chain: ChainId,
    pub height: u64,
    pub timestamp: DateTime<Utc>,
    pub txs: Vec<SynthTx>,
}

fn scaled_integer(value: &str, places: u32) -> String {
    let a: Amount = value.parse().expect("synthetic amounts are decimals");
    a.to_fixed(places).replace('.', "")
}

impl SynthBlock {
    pub fn actions(&self) -> impl Iterator<Item = &SynthAction> {
        self.txs.iter().flat_map(|t| &t.actions)
    }

    /// The raw node document, on one line.
    pub fn render(&self) -> String {
        let doc = match self.chain {
            ChainId::Eosio => self.render_eosio(),
            ChainId::Tezos => self.render_tezos(),
            ChainId::Xrpl => self.render_xrpl(),
        };
        doc.to_string()
    }

    fn render_eosio(&self) -> Value {
        let txs: Vec<Value> = self
            .txs
            .iter()
            .map(|tx| {
                let status = tx.actions.iter().find_map(|a| a.error.clone()).unwrap_or_else(|| "executed".into());
                let actions: Vec<Value> = tx
                    .actions
                    .iter()
                    .map(|a| {
                        let mut data = a.data.clone();
                        if let Some((v, c, _)) = &a.amount {
                            data.insert("quantity".into(), json!(format!("{} {c}", v)));
                        }
                        json!({
                            "account": a.receiver,
                            "name": a.name,
                            "authorization": [{"actor": a.sender, "permission": "active"}],
                            "data": data,
                        })
                    })
                    .collect();
                if actions.is_empty() {
                    // Deferred transaction: id only.
                    return json!({"status": status, "cpu_usage_us": 100, "trx": tx.id});
                }
                let mut trx = json!({"id": tx.id, "signatures": ["SIG_K1_synthetic"], "transaction": {"expiration": "2019-10-01T00:00:00", "actions": actions}});
                if let Some((sig, packed)) = &tx.packed {
                    trx["signatures"] = json!([sig]);
                    trx["compression"] = json!("none");
                    trx["packed_context_free_data"] = json!("");
                    trx["context_free_data"] = json!([]);
                    trx["packed_trx"] = json!(packed);
                }
                json!({
                    "status": status,
                    "cpu_usage_us": 100,
                    "net_usage_words": 16,
                    "trx": trx,
                })
            })
            .collect();
        json!({
            "timestamp": self.timestamp.format("%Y-%m-%dT%H:%M:%S%.3f").to_string(),
            "producer": "producer1111",
            "block_num": self.height,
            "id": format!("{:016x}", self.height),
            "transactions": txs,
        })
    }

    fn render_tezos(&self) -> Value {
        let ops: Vec<Value> = self
            .txs
            .iter()
            .map(|tx| {
                let contents: Vec<Value> = tx
                    .actions
                    .iter()
                    .map(|a| {
                        let mut c = a.data.clone();
                        c.insert("kind".into(), json!(a.name));
                        let mut meta = Map::new();
                        match a.name.as_str() {
                            "endorsement" | "seed_nonce_revelation" | "double_baking_evidence" => {
                                meta.insert("delegate".into(), json!(a.sender));
                            }
                            "activate_account" => {
                                c.insert("pkh".into(), json!(a.sender));
                            }
                            _ => {
                                c.insert("source".into(), json!(a.sender));
                            }
                        }
                        if !a.receiver.is_empty() {
                            let key = if a.name == "delegation" { "delegate" } else { "destination" };
                            c.insert(key.into(), json!(a.receiver));
                        }
                        if let Some((v, _, _)) = &a.amount {
                            c.insert("amount".into(), json!(scaled_integer(v, 6)));
                        }
                        let status = if a.error.is_some() { "failed" } else { "applied" };
                        let mut result = json!({"status": status});
                        if let Some(code) = &a.error {
                            result["errors"] = json!([{"kind": "temporary", "id": code}]);
                        }
                        meta.insert("operation_result".into(), result);
                        c.insert("metadata".into(), Value::Object(meta));
                        Value::Object(c)
                    })
                    .collect();
                json!({"protocol": "PsBabyM1", "chain_id": "NetXdQprcVkpaWU", "hash": tx.id, "branch": "BLsynthetic", "contents": contents, "signature": "sig"})
            })
            .collect();
        json!({
            "protocol": "PsBabyM1",
            "chain_id": "NetXdQprcVkpaWU",
            "hash": format!("BL{:016x}", self.height),
            "header": {"level": self.height, "proto": 5, "timestamp": self.timestamp.format("%Y-%m-%dT%H:%M:%SZ").to_string()},
            "metadata": {},
            "operations": [[], [], [], ops],
        })
    }

    fn render_xrpl(&self) -> Value {
        let txs: Vec<Value> = self
            .txs
            .iter()
            .flat_map(|tx| {
                tx.actions.iter().map(move |a| {
                    let mut t = a.data.clone();
                    t.insert("TransactionType".into(), json!(a.name));
                    t.insert("hash".into(), json!(tx.id));
                    t.insert("Account".into(), json!(a.sender));
                    if !a.receiver.is_empty() {
                        t.insert("Destination".into(), json!(a.receiver));
                    }
                    if let Some((v, c, issuer)) = &a.amount {
                        let amount = match issuer {
                            None if c == "XRP" => json!(scaled_integer(v, 6)),
                            _ => json!({"currency": c, "issuer": issuer.clone().unwrap_or_default(), "value": v}),
                        };
                        t.insert("Amount".into(), amount);
                    }
                    if let Some(tag) = a.destination_tag {
                        t.insert("DestinationTag".into(), json!(tag));
                    }
                    t.insert("Fee".into(), json!("12"));
                    let code = a.error.clone().unwrap_or_else(|| "tesSUCCESS".into());
                    t.insert("metaData".into(), json!({"TransactionIndex": 0, "TransactionResult": code}));
                    Value::Object(t)
                })
            })
            .collect();
        let close = self.timestamp.timestamp() - crate::adapters::xrpl::RIPPLE_EPOCH_OFFSET;
        json!({
            "id": self.height,
            "status": "success",
            "type": "response",
            "result": {
                "ledger_index": self.height,
                "validated": true,
                "ledger": {
                    "ledger_index": self.height.to_string(),
                    "close_time": close,
                    "closed": true,
                    "transactions": txs,
                },
            },
        })
    }
}

/// Shape of a generated archive.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub chain: ChainId,
    pub start_height: u64,
    pub blocks: u64,
    pub start_time: DateTime<Utc>,
    pub interval_secs: i64,
    /// Mean actions per block; the count is uniform on `0..=2 * mean`.
    pub mean_actions: u32,
    pub accounts: usize,
    pub seed: u64,
    /// Full-size EOSIO transaction ids, signatures and packed transactions,
    /// as in real `get_block` responses.
    pub archival: bool,
}

impl SynthConfig {
    pub fn new(chain: ChainId, blocks: u64, seed: u64) -> Self {
        SynthConfig {
            chain,
            start_height: 1,
            blocks,
            start_time: "2019-10-01T00:00:00Z".parse().expect("valid timestamp"),
            interval_secs: 30,
            mean_actions: 10,
            accounts: 500,
            seed,
            archival: false,
        }
    }
}

fn account(chain: ChainId, i: usize) -> String {
    match chain {
        ChainId::Eosio => {
            // EOSIO names use a-z and 1-5.
            let mut s = String::from("acct");
            let mut n = i;
            for _ in 0..8 {
                s.push(b"abcdefghijklmnopqrstuvwxyz12345"[n % 31] as char);
                n /= 31;
            }
            s
        }
        ChainId::Tezos => format!("tz1synth{i:026}"),
        ChainId::Xrpl => format!("rSynth{i:027}"),
    }
}

/// Skewed account pick, so a few accounts dominate like on real chains.
fn pick(rng: &mut impl Rng, chain: ChainId, n: usize) -> String {
    let u: f64 = rng.gen();
    account(chain, ((u * u * u) * n as f64) as usize % n.max(1))
}

fn eosio_action(rng: &mut impl Rng, sender: &str, n: usize) -> SynthAction {
    let to = pick(rng, ChainId::Eosio, n);
    match rng.gen_range(0..100) {
        0..=69 => SynthAction::new(sender, "eosio.token", "transfer")
            .amount(&format!("{}.{:04}", rng.gen_range(0..100), rng.gen_range(0..10_000)), "EOS", None)
            .with("from", json!(sender))
            .with("to", json!(to))
            .with("memo", json!("")),
        70..=74 => SynthAction::new(sender, "eidosonecoin", "transfer")
            .amount(&format!("0.{:04}", rng.gen_range(1..10_000)), "EIDOS", Some("eidosonecoin"))
            .with("from", json!(sender))
            .with("to", json!(to)),
        75..=79 => SynthAction::new(sender, "betdicetasks", "removetask"),
        80..=83 => SynthAction::new(sender, "whaleextrust", "verifytrade2"),
        84..=86 => SynthAction::new(sender, "eosio", "delegatebw"),
        87..=88 => SynthAction::new(sender, "eosio", "voteproducer"),
        89..=90 => SynthAction::new(sender, "eosio", "newaccount"),
        91..=92 => SynthAction::new(sender, "eosio", "buyrambytes"),
        93 => SynthAction::new(sender, "eosio", "updateauth"),
        94 => SynthAction::new(sender, "eosio", "linkauth"),
        95 => SynthAction::new(sender, "eosio", "bidname"),
        _ => SynthAction::new(sender, &to, "execute"),
    }
}

fn tezos_action(rng: &mut impl Rng, sender: &str, n: usize) -> SynthAction {
    let to = pick(rng, ChainId::Tezos, n);
    let a = match rng.gen_range(0..100) {
        0..=69 => SynthAction::new(sender, "", "endorsement"),
        70..=89 => SynthAction::new(sender, &to, "transaction").amount(&format!("{}.{:06}", rng.gen_range(0..50), rng.gen_range(0..1_000_000)), "XTZ", None),
        90..=93 => SynthAction::new(sender, "", "reveal"),
        94..=95 => SynthAction::new(sender, &to, "delegation"),
        96..=97 => SynthAction::new(sender, "", "origination"),
        98 => SynthAction::new(sender, "", "seed_nonce_revelation"),
        _ => SynthAction::new(sender, "", "ballot"),
    };
    if a.name == "transaction" && rng.gen_ratio(1, 50) {
        a.failed("proto.005-PsBabyM1.contract.balance_too_low")
    } else {
        a
    }
}

fn xrpl_action(rng: &mut impl Rng, sender: &str, n: usize) -> SynthAction {
    let to = pick(rng, ChainId::Xrpl, n);
    let a = match rng.gen_range(0..100) {
        0..=44 => SynthAction::new(sender, &to, "Payment")
            .amount(&format!("{}.{:06}", rng.gen_range(0..1000), rng.gen_range(0..1_000_000)), "XRP", None)
            .tag(rng.gen_range(0..5)),
        45..=59 => SynthAction::new(sender, &to, "Payment").amount("1", "BTC", Some("rIssuerSynthetic")),
        60..=84 => SynthAction::new(sender, "", "OfferCreate"),
        85..=89 => SynthAction::new(sender, "", "OfferCancel"),
        90..=94 => SynthAction::new(sender, "", "TrustSet"),
        95..=97 => SynthAction::new(sender, "", "AccountSet"),
        _ => SynthAction::new(sender, &to, "EscrowFinish"),
    };
    match a.name.as_str() {
        "Payment" if rng.gen_ratio(1, 4) => a.failed("tecPATH_DRY"),
        "OfferCreate" if rng.gen_ratio(1, 10) => a.failed("tecUNFUNDED_OFFER"),
        _ => a,
    }
}

fn hex(rng: &mut impl Rng, bytes: usize) -> String {
    let mut s = String::with_capacity(bytes * 2);
    for _ in 0..bytes {
        let b: u8 = rng.gen();
        s.push(char::from(b"0123456789abcdef"[(b >> 4) as usize]));
        s.push(char::from(b"0123456789abcdef"[(b & 15) as usize]));
    }
    s
}

fn base58(rng: &mut impl Rng, len: usize) -> String {
    const ALPHABET: &[u8] = b"123456789ABCDEFGHJKLMNPQRSTUVWXYZabcdefghijkmnopqrstuvwxyz";
    (0..len).map(|_| char::from(ALPHABET[rng.gen_range(0..ALPHABET.len())])).collect()
}

/// Generates `cfg.blocks` consecutive blocks.
pub fn generate(cfg: &SynthConfig) -> Vec<SynthBlock> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut next_tx = 0u64;
    (0..cfg.blocks)
        .map(|i| {
            let height = cfg.start_height + i;
            let timestamp = cfg.start_time + Duration::seconds(i as i64 * cfg.interval_secs);
            let mut remaining = rng.gen_range(0..=2 * cfg.mean_actions);
            let mut txs = Vec::new();
            while remaining > 0 {
                let size = match cfg.chain {
                    ChainId::Xrpl => 1,
                    _ => rng.gen_range(1..=3).min(remaining),
                };
                let sender = pick(&mut rng, cfg.chain, cfg.accounts);
                let actions = (0..size)
                    .map(|_| match cfg.chain {
                        ChainId::Eosio => eosio_action(&mut rng, &sender, cfg.accounts),
                        ChainId::Tezos => tezos_action(&mut rng, &sender, cfg.accounts),
                        ChainId::Xrpl => xrpl_action(&mut rng, &sender, cfg.accounts),
                    })
                    .collect();
                next_tx += 1;
                let (id, packed) = if cfg.archival && cfg.chain == ChainId::Eosio {
                    let sig = format!("SIG_K1_{}", base58(&mut rng, 94));
                    (hex(&mut rng, 32), Some((sig, hex(&mut rng, 16 + 56 * size as usize))))
                } else {
                    (format!("{}{next_tx:012x}", cfg.chain.file_tag()), None)
                };
                txs.push(SynthTx { id, actions, packed });
                remaining -= size;
            }
            if cfg.chain == ChainId::Eosio && rng.gen_ratio(1, 20) {
                next_tx += 1;
                txs.push(SynthTx { id: format!("deferred{next_tx:012x}"), actions: Vec::new(), packed: None });
            }
            SynthBlock { chain: cfg.chain, height, timestamp, txs }
        })
        .collect()
}

/// Writes `blocks` as chunks of `chunk_size` heights into `dir`.
pub fn write_archive(dir: &Path, blocks: &[SynthBlock], chunk_size: usize) -> Result<Vec<PathBuf>, StorageError> {
    std::fs::create_dir_all(dir).map_err(|source| StorageError::Io { path: dir.to_path_buf(), source })?;
    let mut paths = Vec::new();
    for chunk in blocks.chunks(chunk_size.max(1)) {
        let (first, last) = (chunk[0].height, chunk[chunk.len() - 1].height);
        let path = dir.join(chunk_file_name(chunk[0].chain, first, last));
        let lines: Vec<(u64, String)> = chunk.iter().map(|b| (b.height, b.render())).collect();
        write_chunk(chunk[0].chain, &lines, &path)?;
        paths.push(path);
    }
    Ok(paths)
}

struct NodeState {
    chain: ChainId,
    blocks: BTreeMap<u64, String>,
    /// Remaining forced failures per height.
    failures: Mutex<HashMap<u64, u32>>,
    requests: AtomicU64,
}

impl NodeState {
    /// The stored document, or `None` when this request must fail.
    fn answer(&self, height: u64) -> Option<&String> {
        self.requests.fetch_add(1, Ordering::SeqCst);
        let mut f = self.failures.lock().expect("failure table");
        if let Some(n) = f.get_mut(&height).filter(|n| **n > 0) {
            *n -= 1;
            return None;
        }
        self.blocks.get(&height)
    }
}

/// A local node serving stored documents: HTTP for EOSIO and Tezos,
/// websocket `ledger` commands for XRPL. Heights listed in `failures` fail
/// that many times before succeeding.
pub struct MockNode {
    pub url: String,
    state: Arc<NodeState>,
    stop: Arc<AtomicBool>,
    addr: std::net::SocketAddr,
    accept: Option<JoinHandle<()>>,
}

impl MockNode {
    pub fn serve(chain: ChainId, blocks: BTreeMap<u64, String>, failures: HashMap<u64, u32>) -> std::io::Result<MockNode> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let url = match chain {
            ChainId::Xrpl => format!("ws://{addr}"),
            _ => format!("http://{addr}"),
        };
        let state = Arc::new(NodeState { chain, blocks, failures: Mutex::new(failures), requests: AtomicU64::new(0) });
        let stop = Arc::new(AtomicBool::new(false));
        let (st, sp) = (state.clone(), stop.clone());
        let accept = std::thread::spawn(move || {
            for conn in listener.incoming() {
                if sp.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(conn) = conn else { continue };
                let _ = conn.set_nodelay(true);
                let st = st.clone();
                std::thread::spawn(move || {
                    match st.chain {
                        ChainId::Xrpl => {
                            let _ = serve_ws(&st, conn);
                        }
                        _ => {
                            let _ = serve_http(&st, conn);
                        }
                    }
                });
            }
        });
        Ok(MockNode { url, state, stop, addr, accept: Some(accept) })
    }

    pub fn requests(&self) -> u64 {
        self.state.requests.load(Ordering::SeqCst)
    }
}

impl Drop for MockNode {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

fn serve_http(st: &NodeState, conn: TcpStream) -> std::io::Result<()> {
    let mut reader = BufReader::new(conn.try_clone()?);
    let mut out = conn;
    loop {
        let mut request_line = String::new();
        if reader.read_line(&mut request_line)? == 0 {
            return Ok(());
        }
        let mut content_length = 0usize;
        loop {
            let mut h = String::new();
            reader.read_line(&mut h)?;
            let h = h.trim_end();
            if h.is_empty() {
                break;
            }
            if let Some((k, v)) = h.split_once(':') {
                if k.eq_ignore_ascii_case("content-length") {
                    content_length = v.trim().parse().unwrap_or(0);
                }
            }
        }
        let mut body = vec![0u8; content_length];
        reader.read_exact(&mut body)?;
        let path = request_line.split_whitespace().nth(1).unwrap_or_default();
        let height = if path.starts_with("/v1/chain/get_block") {
            serde_json::from_slice::<Value>(&body).ok().and_then(|v| v.get("block_num_or_id").and_then(Value::as_u64))
        } else {
            path.strip_prefix("/chains/main/blocks/").and_then(|h| h.parse().ok())
        };
        let (status, payload) = match height.map(|h| (h, st.answer(h))) {
            Some((_, Some(doc))) => ("200 OK", doc.clone()),
            Some((h, None)) if st.blocks.contains_key(&h) => ("500 Internal Server Error", r#"{"error":"busy"}"#.to_string()),
            _ => ("404 Not Found", r#"{"error":"unknown block"}"#.to_string()),
        };
        let response = format!("HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{payload}", payload.len());
        out.write_all(response.as_bytes())?;
    }
}

fn serve_ws(st: &NodeState, conn: TcpStream) -> Result<(), Box<dyn std::error::Error>> {
    let mut ws = tungstenite::accept(conn)?;
    loop {
        let msg = ws.read()?;
        if !msg.is_text() {
            if msg.is_close() {
                return Ok(());
            }
            continue;
        }
        let req: Value = serde_json::from_str(msg.to_text()?)?;
        let id = req.get("id").cloned().unwrap_or(Value::Null);
        let height = req.get("ledger_index").and_then(Value::as_u64).unwrap_or_default();
        let reply = match st.answer(height) {
            Some(doc) => doc.clone(),
            None => json!({"id": id, "status": "error", "error": "lgrNotFound", "type": "response"}).to_string(),
        };
        ws.send(tungstenite::Message::text(reply))?;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::parse_block;

    #[test]
    fn rendered_blocks_parse_to_their_ground_truth() {
        for chain in ChainId::ALL {
            let blocks = generate(&SynthConfig::new(chain, 50, 7));
            for b in &blocks {
                let parsed = parse_block(chain, b.render().as_bytes()).unwrap();
                parsed.validate().unwrap();
                assert_eq!((parsed.height, parsed.timestamp, parsed.tx_count), (b.height, b.timestamp, b.txs.len() as u64));
                let got: Vec<(&str, &str, &str, bool)> =
                    parsed.actions.iter().map(|a| (a.sender.as_str(), a.receiver.as_str(), a.name.as_str(), a.success)).collect();
                let want: Vec<(&str, &str, &str, bool)> =
                    b.actions().map(|a| (a.sender.as_str(), a.receiver.as_str(), a.name.as_str(), a.error.is_none())).collect();
                assert_eq!(got, want, "{chain} block {}", b.height);
            }
        }
    }

    #[test]
    fn archival_blocks_carry_packed_transactions() {
        let blocks = generate(&SynthConfig { archival: true, ..SynthConfig::new(ChainId::Eosio, 20, 1) });
        for b in &blocks {
            let parsed = parse_block(ChainId::Eosio, b.render().as_bytes()).unwrap();
            assert_eq!(parsed.actions.len(), b.actions().count());
            assert_eq!(parsed.tx_count, b.txs.len() as u64);
        }
        let line = blocks.iter().find(|b| b.txs.iter().any(|t| t.packed.is_some())).unwrap().render();
        assert!(line.contains("\"packed_trx\"") && line.contains("SIG_K1_"));
    }

    #[test]
    fn generation_is_seeded() {
        let c = SynthConfig::new(ChainId::Xrpl, 20, 3);
        assert_eq!(generate(&c), generate(&c));
        assert_ne!(generate(&c), generate(&SynthConfig { seed: 4, ..c.clone() }));
    }
}
