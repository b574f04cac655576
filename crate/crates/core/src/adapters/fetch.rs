//! Block fetching over HTTP RPC (EOSIO, Tezos) and websocket (XRPL).
//!
//! Heights already present in the archive are skipped, so an interrupted or
//! partially failed run is completed by running it again.

use std::collections::BTreeMap;
use std::fmt;
use std::net::TcpStream;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tungstenite::stream::MaybeTlsStream;
use tungstenite::{Message, WebSocket};

use super::peek_height;
use crate::model::ChainId;
use crate::storage::{ArchiveWriter, HeightRange, StorageError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Transport {
    HttpRpc,
    WebSocket,
}

impl Transport {
    pub fn for_chain(chain: ChainId) -> Self {
        match chain {
            ChainId::Xrpl => Transport::WebSocket,
            ChainId::Eosio | ChainId::Tezos => Transport::HttpRpc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointSpec {
    pub chain: ChainId,
    pub url: String,
    pub transport: Transport,
    /// Requests per second.
    pub rate_limit: f64,
    pub max_retries: u32,
    pub timeout: Duration,
}

impl EndpointSpec {
    pub fn new(chain: ChainId, url: impl Into<String>) -> Self {
        EndpointSpec {
            chain,
            url: url.into(),
            transport: Transport::for_chain(chain),
            rate_limit: 10.0,
            max_retries: 3,
            timeout: Duration::from_secs(30),
        }
    }

    pub fn validate(&self) -> Result<(), FetchError> {
        let bad = |m: String| Err(FetchError::InvalidEndpoint(m));
        if self.transport != Transport::for_chain(self.chain) {
            return bad(format!("{} endpoints use {:?}, not {:?}", self.chain, Transport::for_chain(self.chain), self.transport));
        }
        if !(self.rate_limit > 0.0 && self.rate_limit.is_finite()) {
            return bad(format!("rate limit must be positive, got {}", self.rate_limit));
        }
        let schemes: &[&str] = match self.transport {
            Transport::HttpRpc => &["http://", "https://"],
            Transport::WebSocket => &["ws://", "wss://"],
        };
        if !schemes.iter().any(|s| self.url.starts_with(s)) {
            return bad(format!("{} must start with one of {schemes:?}", self.url));
        }
        Ok(())
    }
}

/// Exponential backoff between attempts: `base * factor^attempt`, scaled by a
/// uniform factor in `[1 - jitter, 1 + jitter]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub base: Duration,
    pub factor: u32,
    pub jitter: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { base: Duration::from_millis(500), factor: 2, jitter: 0.2 }
    }
}

impl RetryPolicy {
    pub fn delay(&self, attempt: u32, rng: &mut impl Rng) -> Duration {
        let nominal = self.base.saturating_mul(self.factor.saturating_pow(attempt));
        let j = if self.jitter > 0.0 { rng.gen_range(-self.jitter..=self.jitter) } else { 0.0 };
        nominal.mul_f64((1.0 + j).max(0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SourceErrorKind {
    /// Could not reach the endpoint at all.
    Connect,
    /// Reached the endpoint but got an unusable answer.
    Response,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceError {
    pub kind: SourceErrorKind,
    pub message: String,
}

impl SourceError {
    pub fn connect(m: impl fmt::Display) -> Self {
        SourceError { kind: SourceErrorKind::Connect, message: m.to_string() }
    }

    pub fn response(m: impl fmt::Display) -> Self {
        SourceError { kind: SourceErrorKind::Response, message: m.to_string() }
    }
}

impl fmt::Display for SourceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// One request for one block; returns the raw response document.
pub trait BlockSource {
    fn fetch(&mut self, height: u64) -> Result<Vec<u8>, SourceError>;
}

#[derive(Debug, thiserror::Error)]
pub enum FetchError {
    #[error("invalid endpoint: {0}")]
    InvalidEndpoint(String),
    #[error("invalid range: start {start} > end {end}")]
    InvalidRange { start: u64, end: u64 },
    #[error("endpoint {url} unavailable: {reason}")]
    EndpointUnavailable { url: String, reason: String },
    #[error(transparent)]
    Storage(#[from] StorageError),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchSummary {
    pub fetched: u64,
    pub failures: Vec<u64>,
    pub already_present: u64,
}

pub struct HttpSource {
    chain: ChainId,
    base: String,
    agent: ureq::Agent,
}

impl HttpSource {
    pub fn new(endpoint: &EndpointSpec) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(endpoint.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpSource { chain: endpoint.chain, base: endpoint.url.trim_end_matches('/').to_string(), agent }
    }
}

fn classify_ureq(e: ureq::Error) -> SourceError {
    match e {
        ureq::Error::Io(_) | ureq::Error::ConnectionFailed | ureq::Error::HostNotFound | ureq::Error::Timeout(_) => {
            SourceError::connect(e)
        }
        other => SourceError::response(other),
    }
}

impl BlockSource for HttpSource {
    fn fetch(&mut self, height: u64) -> Result<Vec<u8>, SourceError> {
        let result = match self.chain {
            ChainId::Eosio => self
                .agent
                .post(format!("{}/v1/chain/get_block", self.base))
                .header("Content-Type", "application/json")
                .send(json!({ "block_num_or_id": height }).to_string()),
            _ => self.agent.get(format!("{}/chains/main/blocks/{height}", self.base)).call(),
        };
        let mut resp = result.map_err(classify_ureq)?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .with_config()
            .limit(u64::MAX)
            .read_to_vec()
            .map_err(classify_ureq)?;
        if status != 200 {
            return Err(SourceError::response(format!("HTTP {status} for height {height}")));
        }
        Ok(body)
    }
}

/// XRPL websocket client issuing one `ledger` command per height. The
/// connection is reopened lazily after any failure.
pub struct WsSource {
    url: String,
    timeout: Duration,
    socket: Option<WebSocket<MaybeTlsStream<TcpStream>>>,
}

impl WsSource {
    pub fn new(endpoint: &EndpointSpec) -> Self {
        WsSource { url: endpoint.url.clone(), timeout: endpoint.timeout, socket: None }
    }

    fn connect(&mut self) -> Result<&mut WebSocket<MaybeTlsStream<TcpStream>>, SourceError> {
        if self.socket.is_none() {
            let (socket, _) = tungstenite::connect(self.url.as_str()).map_err(SourceError::connect)?;
            let tcp = match socket.get_ref() {
                MaybeTlsStream::Plain(s) => Some(s),
                MaybeTlsStream::Rustls(s) => Some(s.get_ref()),
                _ => None,
            };
            if let Some(tcp) = tcp {
                tcp.set_read_timeout(Some(self.timeout)).map_err(SourceError::connect)?;
                tcp.set_write_timeout(Some(self.timeout)).map_err(SourceError::connect)?;
                tcp.set_nodelay(true).map_err(SourceError::connect)?;
            }
            self.socket = Some(socket);
        }
        Ok(self.socket.as_mut().expect("socket just opened"))
    }

    fn request(&mut self, height: u64) -> Result<Vec<u8>, SourceError> {
        let socket = self.connect()?;
        let req = json!({"id": height, "command": "ledger", "ledger_index": height, "transactions": true, "expand": true});
        socket.send(Message::text(req.to_string())).map_err(SourceError::connect)?;
        loop {
            let body = match socket.read().map_err(SourceError::connect)? {
                Message::Text(t) => t.as_bytes().to_vec(),
                Message::Binary(b) => b.to_vec(),
                Message::Close(_) => return Err(SourceError::connect("connection closed by server")),
                _ => continue,
            };
            let doc: Value = serde_json::from_slice(&body).map_err(SourceError::response)?;
            // Unsolicited stream messages carry no matching id.
            if doc.get("id").and_then(Value::as_u64) != Some(height) {
                continue;
            }
            if doc.get("status").and_then(Value::as_str) != Some("success") {
                let err = doc.get("error").and_then(Value::as_str).unwrap_or("unknown error");
                return Err(SourceError::response(format!("ledger {height}: {err}")));
            }
            return Ok(body);
        }
    }
}

impl BlockSource for WsSource {
    fn fetch(&mut self, height: u64) -> Result<Vec<u8>, SourceError> {
        let r = self.request(height);
        if matches!(&r, Err(e) if e.kind == SourceErrorKind::Connect) {
            self.socket = None;
        }
        r
    }
}

pub fn open_source(endpoint: &EndpointSpec) -> Box<dyn BlockSource> {
    match endpoint.transport {
        Transport::HttpRpc => Box::new(HttpSource::new(endpoint)),
        Transport::WebSocket => Box::new(WsSource::new(endpoint)),
    }
}

/// Fetches every height of `[start, end]` missing from `archive`.
pub fn fetch_blocks(endpoint: &EndpointSpec, start: u64, end: u64, archive: &ArchiveWriter) -> Result<FetchSummary, FetchError> {
    endpoint.validate()?;
    let mut source = open_source(endpoint);
    fetch_with(source.as_mut(), endpoint, &RetryPolicy::default(), start, end, archive)
}

/// Spaces request starts at least `1 / rate` seconds apart.
struct Pacer {
    interval: Duration,
    last: Option<Instant>,
}

impl Pacer {
    fn wait(&mut self) {
        if let Some(last) = self.last {
            let elapsed = last.elapsed();
            if elapsed < self.interval {
                std::thread::sleep(self.interval - elapsed);
            }
        }
        self.last = Some(Instant::now());
    }
}

/// Drops CR and LF so the document fits on one archive line. JSON never has
/// raw line breaks inside strings, so this only removes whitespace.
fn to_line(body: &[u8]) -> Result<String, SourceError> {
    let bytes: Vec<u8> = body.iter().copied().filter(|b| *b != b'\n' && *b != b'\r').collect();
    let line = String::from_utf8(bytes).map_err(|_| SourceError::response("response is not UTF-8"))?;
    let trimmed = line.trim();
    if trimmed.len() == line.len() {
        Ok(line)
    } else {
        Ok(trimmed.to_string())
    }
}

pub fn fetch_with(
    source: &mut dyn BlockSource,
    endpoint: &EndpointSpec,
    policy: &RetryPolicy,
    start: u64,
    end: u64,
    archive: &ArchiveWriter,
) -> Result<FetchSummary, FetchError> {
    if start > end {
        return Err(FetchError::InvalidRange { start, end });
    }
    if archive.chain != endpoint.chain {
        return Err(FetchError::InvalidEndpoint(format!(
            "archive holds {} blocks, endpoint serves {}",
            archive.chain, endpoint.chain
        )));
    }
    let missing = archive.missing(start, end)?;
    let existing = archive.existing_chunks()?;
    let missing_count: u64 = missing.iter().map(HeightRange::len).sum();
    let mut summary = FetchSummary { already_present: (end - start + 1) - missing_count, ..Default::default() };
    let mut pacer = Pacer { interval: Duration::from_secs_f64(1.0 / endpoint.rate_limit), last: None };
    let mut rng = rand::thread_rng();
    let mut pending: Option<(HeightRange, BTreeMap<u64, String>)> = None;

    for h in missing.iter().flat_map(|r| r.start..=r.end) {
        let target = archive.target_chunk(&existing, start, end, h);
        if pending.as_ref().is_some_and(|(r, _)| *r != target) {
            let (r, lines) = pending.take().expect("checked");
            if !lines.is_empty() {
                archive.store(r, lines)?;
            }
        }
        let (_, buf) = pending.get_or_insert_with(|| (target, BTreeMap::new()));

        let mut last_err = None;
        for attempt in 0..=endpoint.max_retries {
            if attempt > 0 {
                std::thread::sleep(policy.delay(attempt - 1, &mut rng));
            }
            pacer.wait();
            let outcome = source.fetch(h).and_then(|body| {
                let line = to_line(&body)?;
                match peek_height(endpoint.chain, line.as_bytes()) {
                    Ok(got) if got == h => Ok(line),
                    Ok(got) => Err(SourceError::response(format!("asked for height {h}, got {got}"))),
                    Err(e) => Err(SourceError::response(e)),
                }
            });
            match outcome {
                Ok(line) => {
                    buf.insert(h, line);
                    last_err = None;
                    break;
                }
                Err(e) => last_err = Some(e),
            }
        }
        match last_err {
            None => summary.fetched += 1,
            Some(e) if e.kind == SourceErrorKind::Connect && summary.fetched == 0 && summary.failures.is_empty() => {
                return Err(FetchError::EndpointUnavailable { url: endpoint.url.clone(), reason: e.message });
            }
            Some(_) => summary.failures.push(h),
        }
    }
    if let Some((r, lines)) = pending {
        if !lines.is_empty() {
            archive.store(r, lines)?;
        }
    }
    Ok(summary)
}

impl FromStr for Transport {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "http" | "http_rpc" | "rpc" => Ok(Transport::HttpRpc),
            "ws" | "websocket" => Ok(Transport::WebSocket),
            other => Err(format!("unknown transport {other:?}")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::storage::{scan, ArchivePattern};
    use std::collections::HashSet;

    struct Mock {
        permanent: HashSet<u64>,
        calls: Vec<u64>,
    }

    impl BlockSource for Mock {
        fn fetch(&mut self, height: u64) -> Result<Vec<u8>, SourceError> {
            self.calls.push(height);
            if self.permanent.contains(&height) {
                return Err(SourceError::response("HTTP 500"));
            }
            Ok(format!("{{\"header\":{{\"level\":{height},\n\"timestamp\":\"2019-10-01T00:00:00Z\"}},\"operations\":[]}}\r\n").into_bytes())
        }
    }

    fn quick() -> RetryPolicy {
        RetryPolicy { base: Duration::from_millis(1), factor: 2, jitter: 0.2 }
    }

    fn endpoint() -> EndpointSpec {
        EndpointSpec { rate_limit: 1e6, max_retries: 2, ..EndpointSpec::new(ChainId::Tezos, "http://mock") }
    }

    #[test]
    fn single_block() {
        let dir = tempfile::tempdir().unwrap();
        let w = ArchiveWriter::new(dir.path(), ChainId::Tezos, 10);
        let mut m = Mock { permanent: HashSet::new(), calls: vec![] };
        let s = fetch_with(&mut m, &endpoint(), &quick(), 100, 100, &w).unwrap();
        assert_eq!((s.fetched, s.failures), (1, vec![]));
    }

    #[test]
    fn permanent_failure_then_resume() {
        let dir = tempfile::tempdir().unwrap();
        let w = ArchiveWriter::new(dir.path(), ChainId::Tezos, 10);
        let mut m = Mock { permanent: HashSet::from([7]), calls: vec![] };
        let s = fetch_with(&mut m, &endpoint(), &quick(), 1, 10, &w).unwrap();
        assert_eq!((s.fetched, s.failures.clone()), (9, vec![7]));
        assert_eq!(m.calls.iter().filter(|h| **h == 7).count(), 3);
        let heights: Vec<u64> = scan(&ArchivePattern::new(w.glob(), 1, 10)).unwrap().map(|r| r.unwrap().0).collect();
        assert_eq!(heights, vec![1, 2, 3, 4, 5, 6, 8, 9, 10]);

        let mut m = Mock { permanent: HashSet::new(), calls: vec![] };
        let s = fetch_with(&mut m, &endpoint(), &quick(), 1, 10, &w).unwrap();
        assert_eq!(m.calls, vec![7]);
        assert_eq!((s.fetched, s.already_present), (1, 9));
        assert!(w.missing(1, 10).unwrap().is_empty());
    }

    #[test]
    fn stored_lines_have_no_line_breaks() {
        let dir = tempfile::tempdir().unwrap();
        let w = ArchiveWriter::new(dir.path(), ChainId::Tezos, 10);
        let mut m = Mock { permanent: HashSet::new(), calls: vec![] };
        fetch_with(&mut m, &endpoint(), &quick(), 1, 3, &w).unwrap();
        for r in scan(&ArchivePattern::new(w.glob(), 1, 3)).unwrap() {
            let (_, line) = r.unwrap();
            assert!(!line.contains(['\n', '\r']));
            assert!(line.starts_with('{') && line.ends_with('}'));
        }
    }

    #[test]
    fn unreachable_is_endpoint_unavailable() {
        struct Down;
        impl BlockSource for Down {
            fn fetch(&mut self, _: u64) -> Result<Vec<u8>, SourceError> {
                Err(SourceError::connect("connection refused"))
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let w = ArchiveWriter::new(dir.path(), ChainId::Tezos, 10);
        let r = fetch_with(&mut Down, &endpoint(), &quick(), 1, 100, &w);
        assert!(matches!(r, Err(FetchError::EndpointUnavailable { .. })));
    }

    #[test]
    fn backoff_schedule() {
        let p = RetryPolicy::default();
        let mut rng = rand::thread_rng();
        for attempt in 0..4 {
            let nominal = 500.0 * 2f64.powi(attempt as i32);
            for _ in 0..50 {
                let d = p.delay(attempt, &mut rng).as_secs_f64() * 1000.0;
                assert!(d >= nominal * 0.8 - 1e-6 && d <= nominal * 1.2 + 1e-6, "{d} vs {nominal}");
            }
        }
    }

    #[test]
    fn endpoint_validation() {
        assert!(EndpointSpec::new(ChainId::Xrpl, "wss://s2.ripple.com").validate().is_ok());
        assert!(EndpointSpec::new(ChainId::Eosio, "https://api.main.alohaeos.com").validate().is_ok());
        let mut e = EndpointSpec::new(ChainId::Tezos, "http://x");
        e.transport = Transport::WebSocket;
        assert!(e.validate().is_err());
        let e = EndpointSpec { rate_limit: 0.0, ..EndpointSpec::new(ChainId::Tezos, "http://x") };
        assert!(e.validate().is_err());
    }
}
