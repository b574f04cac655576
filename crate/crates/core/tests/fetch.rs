mod common;

use std::collections::{BTreeMap, HashMap};
use std::time::Duration;

use txstats::adapters::fetch::{fetch_blocks, fetch_with, open_source, EndpointSpec, FetchError, RetryPolicy};
use txstats::storage::{check_integrity, list_chunks, read_chunk, ArchiveWriter};
use txstats::synth::{generate, MockNode, SynthConfig};
use txstats::ChainId;

fn rendered(chain: ChainId, n: u64, seed: u64) -> BTreeMap<u64, String> {
    generate(&SynthConfig::new(chain, n, seed)).iter().map(|b| (b.height, b.render())).collect()
}

fn fast(chain: ChainId, url: &str) -> EndpointSpec {
    EndpointSpec { rate_limit: 1e6, max_retries: 2, timeout: Duration::from_secs(5), ..EndpointSpec::new(chain, url) }
}

fn quick() -> RetryPolicy {
    RetryPolicy { base: Duration::from_millis(1), factor: 2, jitter: 0.0 }
}

#[test]
fn fetches_every_chain_into_chunks() {
    for chain in ChainId::ALL {
        let blocks = rendered(chain, 100, 3);
        let node = MockNode::serve(chain, blocks.clone(), HashMap::new()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let archive = ArchiveWriter::new(dir.path(), chain, 10);
        let s = fetch_blocks(&fast(chain, &node.url), 1, 100, &archive).unwrap();
        assert_eq!((s.fetched, s.already_present, s.failures.len()), (100, 0, 0), "{chain}");
        assert_eq!(node.requests(), 100);

        let chunks = list_chunks(&archive.glob()).unwrap();
        assert_eq!(chunks.len(), 10, "{chain}");
        let mut stored = BTreeMap::new();
        for c in &chunks {
            stored.extend(read_chunk(c).unwrap());
        }
        assert_eq!(stored, blocks, "{chain}");

        let again = fetch_blocks(&fast(chain, &node.url), 1, 100, &archive).unwrap();
        assert_eq!((again.fetched, again.already_present), (0, 100));
        assert_eq!(node.requests(), 100);
    }
}

#[test]
fn transient_failures_are_retried() {
    let blocks = rendered(ChainId::Eosio, 30, 8);
    let failures = HashMap::from([(4, 1), (17, 2)]);
    let node = MockNode::serve(ChainId::Eosio, blocks, failures).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let archive = ArchiveWriter::new(dir.path(), ChainId::Eosio, 10);
    let ep = fast(ChainId::Eosio, &node.url);
    let s = fetch_with(open_source(&ep).as_mut(), &ep, &quick(), 1, 30, &archive).unwrap();
    assert_eq!((s.fetched, s.failures), (30, vec![]));
    assert_eq!(node.requests(), 33);
}

#[test]
fn exhausted_retries_leave_a_hole_that_a_rerun_fills() {
    let blocks = rendered(ChainId::Xrpl, 40, 2);
    let node = MockNode::serve(ChainId::Xrpl, blocks, HashMap::from([(12, 3), (33, 7)])).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let archive = ArchiveWriter::new(dir.path(), ChainId::Xrpl, 20);
    let ep = fast(ChainId::Xrpl, &node.url);
    let s = fetch_with(open_source(&ep).as_mut(), &ep, &quick(), 1, 40, &archive).unwrap();
    assert_eq!(s.failures, vec![12, 33]);
    let holes: Vec<(u64, u64)> = check_integrity(&archive.pattern(1, 40)).unwrap().iter().map(|r| (r.start, r.end)).collect();
    assert_eq!(holes, vec![(12, 12), (33, 33)]);

    let s = fetch_with(open_source(&ep).as_mut(), &ep, &quick(), 1, 40, &archive).unwrap();
    assert_eq!((s.fetched, s.already_present), (1, 38));
    assert_eq!(s.failures, vec![33]);
    let s = fetch_with(open_source(&ep).as_mut(), &ep, &quick(), 1, 40, &archive).unwrap();
    assert_eq!((s.fetched, s.failures.len()), (1, 0));
    assert!(check_integrity(&archive.pattern(1, 40)).unwrap().is_empty());
}

#[test]
fn unknown_heights_are_failures_not_outages() {
    let node = MockNode::serve(ChainId::Tezos, rendered(ChainId::Tezos, 5, 1), HashMap::new()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let archive = ArchiveWriter::new(dir.path(), ChainId::Tezos, 10);
    let ep = fast(ChainId::Tezos, &node.url);
    let s = fetch_with(open_source(&ep).as_mut(), &ep, &quick(), 1, 8, &archive).unwrap();
    assert_eq!((s.fetched, s.failures), (5, vec![6, 7, 8]));
}

fn dead_url(scheme: &str) -> String {
    let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = l.local_addr().unwrap().port();
    drop(l);
    format!("{scheme}://127.0.0.1:{port}")
}

#[test]
fn unreachable_endpoint_is_reported() {
    for (chain, scheme) in [(ChainId::Eosio, "http"), (ChainId::Xrpl, "ws")] {
        let url = dead_url(scheme);
        let dir = tempfile::tempdir().unwrap();
        let archive = ArchiveWriter::new(dir.path(), chain, 10);
        let ep = fast(chain, &url);
        match fetch_with(open_source(&ep).as_mut(), &ep, &quick(), 1, 10, &archive) {
            Err(FetchError::EndpointUnavailable { url: u, .. }) => assert_eq!(u, url),
            other => panic!("{chain}: {other:?}"),
        }
        assert!(list_chunks(&archive.glob()).unwrap().is_empty());
    }
}

#[test]
fn rejects_bad_endpoints_and_ranges() {
    let dir = tempfile::tempdir().unwrap();
    let archive = ArchiveWriter::new(dir.path(), ChainId::Xrpl, 10);
    let err = fetch_blocks(&fast(ChainId::Xrpl, "http://127.0.0.1:1"), 1, 2, &archive).unwrap_err();
    assert!(matches!(err, FetchError::InvalidEndpoint(_)), "{err}");
    let err = fetch_blocks(&fast(ChainId::Xrpl, "ws://127.0.0.1:1"), 5, 2, &archive).unwrap_err();
    assert!(matches!(err, FetchError::InvalidRange { start: 5, end: 2 }));
    let err = fetch_blocks(&fast(ChainId::Tezos, "http://127.0.0.1:1"), 1, 2, &archive).unwrap_err();
    assert!(matches!(err, FetchError::InvalidEndpoint(_)), "{err}");
}
