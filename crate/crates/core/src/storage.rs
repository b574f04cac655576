//! Chunked block archive: gzip-compressed JSON Lines, one block per line.
//!
//! Chunk files are named `<chain>_blocks-<first>-<last>.jsonl.gz`, so the
//! nominal height range of each file is known before decompressing it. A
//! chunk is complete when it holds exactly `last - first + 1` lines.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adapters::peek_height;
use crate::model::ChainId;

pub const DEFAULT_CHUNK_SIZE: u64 = 10_000;
pub const GZIP_LEVEL: u32 = 6;
const SUFFIX: &str = ".jsonl.gz";

#[derive(Debug, thiserror::Error)]
pub enum StorageError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("corrupt chunk {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },
    #[error("lines are not contiguous: expected height {expected}, found {found}")]
    NonContiguous { expected: u64, found: u64 },
    #[error("heights {start}..={end} are not covered by any chunk")]
    MissingChunk { start: u64, end: u64 },
    #[error("duplicate heights in archive: {heights:?}")]
    DuplicateHeight { heights: Vec<u64> },
    #[error("chunk file name {0:?} does not follow <chain>_blocks-<first>-<last>.jsonl.gz")]
    BadChunkName(String),
    #[error("invalid archive pattern {0:?}: wildcards are only allowed in the file name")]
    BadPattern(String),
    #[error("block line for height {0} contains a line break")]
    MultiLine(u64),
    #[error("chunks of several chains match the pattern")]
    MixedChains,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StorageError + '_ {
    move |source| StorageError::Io { path: path.to_path_buf(), source }
}

/// Inclusive height range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HeightRange {
    pub start: u64,
    pub end: u64,
}

impl HeightRange {
    pub fn new(start: u64, end: u64) -> Self {
        HeightRange { start, end }
    }

    pub fn len(&self) -> u64 {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, h: u64) -> bool {
        self.start <= h && h <= self.end
    }
}

impl fmt::Display for HeightRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.start, self.end)
    }
}

/// Collapses sorted, distinct heights into ranges.
pub fn to_ranges(sorted: impl IntoIterator<Item = u64>) -> Vec<HeightRange> {
    let mut out: Vec<HeightRange> = Vec::new();
    for h in sorted {
        match out.last_mut() {
            Some(r) if r.end + 1 == h => r.end = h,
            _ => out.push(HeightRange::new(h, h)),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchiveChunk {
    pub path: PathBuf,
    pub chain: ChainId,
    pub first_height: u64,
    pub last_height: u64,
    pub line_count: u64,
}

impl ArchiveChunk {
    pub fn range(&self) -> HeightRange {
        HeightRange::new(self.first_height, self.last_height)
    }

    pub fn is_complete(&self) -> bool {
        self.line_count == self.range().len()
    }
}

/// A chunk file known by name only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkRef {
    pub path: PathBuf,
    pub chain: ChainId,
    pub range: HeightRange,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchivePattern {
    pub glob: String,
    pub start: u64,
    pub end: u64,
}

impl ArchivePattern {
    pub fn new(glob: impl Into<String>, start: u64, end: u64) -> Self {
        ArchivePattern { glob: glob.into(), start, end }
    }

    pub fn range(&self) -> HeightRange {
        HeightRange::new(self.start, self.end)
    }
}

pub fn chunk_file_name(chain: ChainId, first: u64, last: u64) -> String {
    format!("{}_blocks-{first}-{last}{SUFFIX}", chain.file_tag())
}

pub fn parse_chunk_name(file_name: &str) -> Option<(ChainId, HeightRange)> {
    let stem = file_name.strip_suffix(SUFFIX)?;
    let (tag, range) = stem.split_once("_blocks-")?;
    let chain = ChainId::ALL.into_iter().find(|c| c.file_tag() == tag)?;
    let (first, last) = range.split_once('-')?;
    let (first, last) = (first.parse().ok()?, last.parse().ok()?);
    (first <= last).then(|| (chain, HeightRange::new(first, last)))
}

fn wildcard_match(pattern: &[u8], name: &[u8]) -> bool {
    match (pattern.first(), name.first()) {
        (None, None) => true,
        (Some(b'*'), _) => wildcard_match(&pattern[1..], name) || (!name.is_empty() && wildcard_match(pattern, &name[1..])),
        (Some(b'?'), Some(_)) => wildcard_match(&pattern[1..], &name[1..]),
        (Some(p), Some(n)) if p == n => wildcard_match(&pattern[1..], &name[1..]),
        _ => false,
    }
}

/// Resolves a file-name glob (`/data/eos_blocks-*.jsonl.gz`) to chunk files
/// sorted by first height.
pub fn list_chunks(glob: &str) -> Result<Vec<ChunkRef>, StorageError> {
    let path = Path::new(glob);
    let dir = match path.parent() {
        Some(d) if d.as_os_str().is_empty() => Path::new("."),
        Some(d) => d,
        None => Path::new("."),
    };
    if dir.to_string_lossy().contains(['*', '?']) {
        return Err(StorageError::BadPattern(glob.to_string()));
    }
    let file_pattern = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    let mut chunks = Vec::new();
    let entries = match fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(chunks),
        Err(e) => return Err(io_err(dir)(e)),
    };
    for entry in entries {
        let entry = entry.map_err(io_err(dir))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if !wildcard_match(file_pattern.as_bytes(), name.as_bytes()) {
            continue;
        }
        let (chain, range) = parse_chunk_name(&name).ok_or_else(|| StorageError::BadChunkName(name.clone()))?;
        chunks.push(ChunkRef { path: entry.path(), chain, range });
    }
    chunks.sort_by_key(|c| (c.range.start, c.range.end, c.path.clone()));
    if chunks.windows(2).any(|w| w[0].chain != w[1].chain) {
        return Err(StorageError::MixedChains);
    }
    Ok(chunks)
}

fn write_lines_atomic<'a>(path: &Path, lines: impl Iterator<Item = &'a str>) -> Result<u64, StorageError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let tmp = path.with_extension(format!("tmp-{}", std::process::id()));
    let file = File::create(&tmp).map_err(io_err(&tmp))?;
    let mut enc = GzEncoder::new(BufWriter::new(file), Compression::new(GZIP_LEVEL));
    let mut count = 0u64;
    for line in lines {
        enc.write_all(line.as_bytes()).map_err(io_err(&tmp))?;
        enc.write_all(b"\n").map_err(io_err(&tmp))?;
        count += 1;
    }
    let mut inner = enc.finish().map_err(io_err(&tmp))?;
    inner.flush().map_err(io_err(&tmp))?;
    inner.into_inner().map_err(|e| io_err(&tmp)(e.into_error()))?.sync_all().map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))?;
    Ok(count)
}

/// Writes a complete chunk of contiguous, ascending block lines.
pub fn write_chunk(chain: ChainId, lines: &[(u64, String)], path: &Path) -> Result<ArchiveChunk, StorageError> {
    let Some(&(first, _)) = lines.first() else {
        return Err(StorageError::NonContiguous { expected: 0, found: 0 });
    };
    for (i, (h, line)) in lines.iter().enumerate() {
        let expected = first + i as u64;
        if *h != expected {
            return Err(StorageError::NonContiguous { expected, found: *h });
        }
        if line.contains('\n') {
            return Err(StorageError::MultiLine(*h));
        }
    }
    let last = first + lines.len() as u64 - 1;
    let line_count = write_lines_atomic(path, lines.iter().map(|(_, l)| l.as_str()))?;
    Ok(ArchiveChunk { path: path.to_path_buf(), chain, first_height: first, last_height: last, line_count })
}

/// Writes a chunk that may have gaps; heights must be strictly increasing
/// and inside `range`.
pub fn write_partial_chunk(
    chain: ChainId,
    range: HeightRange,
    lines: &BTreeMap<u64, String>,
    path: &Path,
) -> Result<ArchiveChunk, StorageError> {
    for (h, line) in lines {
        if !range.contains(*h) {
            return Err(StorageError::NonContiguous { expected: range.start, found: *h });
        }
        if line.contains('\n') {
            return Err(StorageError::MultiLine(*h));
        }
    }
    let line_count = write_lines_atomic(path, lines.values().map(String::as_str))?;
    Ok(ArchiveChunk { path: path.to_path_buf(), chain, first_height: range.start, last_height: range.end, line_count })
}

/// Decompresses a chunk into its lines. Any decompression error is fatal.
pub fn read_chunk_lines(path: &Path) -> Result<Vec<String>, StorageError> {
    let file = File::open(path).map_err(io_err(path))?;
    let reader = BufReader::with_capacity(1 << 16, MultiGzDecoder::new(BufReader::new(file)));
    reader
        .lines()
        .map(|l| l.map_err(|e| StorageError::Corrupt { path: path.to_path_buf(), reason: e.to_string() }))
        .collect()
}

/// Lines of a chunk paired with their heights. Heights come from the file
/// name when the chunk is complete, otherwise from each line.
pub fn read_chunk(chunk: &ChunkRef) -> Result<Vec<(u64, String)>, StorageError> {
    let lines = read_chunk_lines(&chunk.path)?;
    if lines.len() as u64 == chunk.range.len() {
        return Ok((chunk.range.start..).zip(lines).collect());
    }
    Ok(lines
        .into_iter()
        .filter_map(|l| peek_height(chunk.chain, l.as_bytes()).ok().map(|h| (h, l)))
        .collect())
}

/// Heights not covered by any chunk's nominal range.
fn uncovered(chunks: &[ChunkRef], range: HeightRange) -> Vec<HeightRange> {
    let mut missing = Vec::new();
    let mut next = range.start;
    for c in chunks {
        if c.range.end < next {
            continue;
        }
        if c.range.start > range.end {
            break;
        }
        if c.range.start > next {
            missing.push(HeightRange::new(next, c.range.start - 1));
        }
        next = next.max(c.range.end.saturating_add(1));
        if next > range.end {
            break;
        }
    }
    if next <= range.end {
        missing.push(HeightRange::new(next, range.end));
    }
    missing
}

fn overlapping(chunks: Vec<ChunkRef>, range: HeightRange) -> Vec<ChunkRef> {
    chunks.into_iter().filter(|c| c.range.end >= range.start && c.range.start <= range.end).collect()
}

/// Chunks overlapping the pattern's range; fails when part of the range has
/// no chunk file at all.
pub fn covering_chunks(pattern: &ArchivePattern) -> Result<Vec<ChunkRef>, StorageError> {
    let chunks = list_chunks(&pattern.glob)?;
    if let Some(gap) = uncovered(&chunks, pattern.range()).first() {
        return Err(StorageError::MissingChunk { start: gap.start, end: gap.end });
    }
    Ok(overlapping(chunks, pattern.range()))
}

/// Sequential scan: chunks in height order, lines ascending within a chunk.
pub fn scan(pattern: &ArchivePattern) -> Result<impl Iterator<Item = Result<(u64, String), StorageError>>, StorageError> {
    let chunks = covering_chunks(pattern)?;
    let range = pattern.range();
    Ok(chunks.into_iter().flat_map(move |c| {
        let items: Vec<Result<(u64, String), StorageError>> = match read_chunk(&c) {
            Ok(lines) => lines.into_iter().filter(|(h, _)| range.contains(*h)).map(Ok).collect(),
            Err(e) => vec![Err(e)],
        };
        items
    }))
}

/// Chunk-parallel scan with `workers` threads; returns lines grouped by chunk
/// in height order.
pub fn scan_parallel(pattern: &ArchivePattern, workers: usize) -> Result<Vec<(u64, String)>, StorageError> {
    let chunks = covering_chunks(pattern)?;
    let range = pattern.range();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    let per_chunk: Vec<Vec<(u64, String)>> = pool.install(|| {
        chunks
            .par_iter()
            .map(|c| read_chunk(c).map(|lines| lines.into_iter().filter(|(h, _)| range.contains(*h)).collect()))
            .collect::<Result<_, _>>()
    })?;
    Ok(per_chunk.into_iter().flatten().collect())
}

/// Missing height ranges inside the pattern's range. Every line is inspected,
/// so lines that cannot be read count as missing. Heights present more than
/// once are an error.
pub fn check_integrity(pattern: &ArchivePattern) -> Result<Vec<HeightRange>, StorageError> {
    let range = pattern.range();
    let chunks = overlapping(list_chunks(&pattern.glob)?, range);
    let per_chunk: Vec<Vec<u64>> = chunks
        .par_iter()
        .map(|c| {
            read_chunk_lines(&c.path).map(|lines| {
                lines
                    .iter()
                    .filter_map(|l| peek_height(c.chain, l.as_bytes()).ok())
                    .filter(|h| range.contains(*h))
                    .collect()
            })
        })
        .collect::<Result<_, _>>()?;
    let mut heights: Vec<u64> = per_chunk.into_iter().flatten().collect();
    heights.sort_unstable();
    let mut dups: Vec<u64> = heights.windows(2).filter(|w| w[0] == w[1]).map(|w| w[0]).collect();
    dups.dedup();
    if !dups.is_empty() {
        return Err(StorageError::DuplicateHeight { heights: dups });
    }
    Ok(missing_from_sorted(&heights, range))
}

/// Complement of sorted, distinct `present` within `range`.
pub fn missing_from_sorted(present: &[u64], range: HeightRange) -> Vec<HeightRange> {
    let mut missing = Vec::new();
    let mut next = range.start;
    for &h in present {
        if h > next {
            missing.push(HeightRange::new(next, h - 1));
        }
        next = h + 1;
    }
    if next <= range.end {
        missing.push(HeightRange::new(next, range.end));
    }
    missing
}

/// Writes fetched blocks into an archive directory, merging into existing
/// chunk files so that partially fetched chunks can be completed later.
#[derive(Debug, Clone)]
pub struct ArchiveWriter {
    pub dir: PathBuf,
    pub chain: ChainId,
    pub chunk_size: u64,
}

impl ArchiveWriter {
    pub fn new(dir: impl Into<PathBuf>, chain: ChainId, chunk_size: u64) -> Self {
        ArchiveWriter { dir: dir.into(), chain, chunk_size: chunk_size.max(1) }
    }

    pub fn glob(&self) -> String {
        format!("{}/{}_blocks-*{SUFFIX}", self.dir.display(), self.chain.file_tag())
    }

    pub fn pattern(&self, start: u64, end: u64) -> ArchivePattern {
        ArchivePattern::new(self.glob(), start, end)
    }

    /// Heights in `[start, end]` not yet stored.
    pub fn missing(&self, start: u64, end: u64) -> Result<Vec<HeightRange>, StorageError> {
        check_integrity(&self.pattern(start, end))
    }

    /// Chunk range that height `h` belongs to for a run over `[start, end]`:
    /// an existing chunk file when one covers `h`, otherwise the `chunk_size`
    /// slot aligned on `start`.
    pub fn target_chunk(&self, existing: &[ChunkRef], start: u64, end: u64, h: u64) -> HeightRange {
        if let Some(c) = existing.iter().find(|c| c.range.contains(h)) {
            return c.range;
        }
        let k = (h - start) / self.chunk_size;
        let first = start + k * self.chunk_size;
        HeightRange::new(first, (first + self.chunk_size - 1).min(end))
    }

    pub fn existing_chunks(&self) -> Result<Vec<ChunkRef>, StorageError> {
        list_chunks(&self.glob())
    }

    /// Merges `lines` into the chunk file for `range`, creating it if needed.
    pub fn store(&self, range: HeightRange, lines: BTreeMap<u64, String>) -> Result<ArchiveChunk, StorageError> {
        let path = self.dir.join(chunk_file_name(self.chain, range.start, range.end));
        let mut merged = BTreeMap::new();
        if path.exists() {
            let chunk = ChunkRef { path: path.clone(), chain: self.chain, range };
            merged.extend(read_chunk(&chunk)?);
        }
        merged.extend(lines);
        write_partial_chunk(self.chain, range, &merged, &path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(h: u64) -> String {
        format!(r#"{{"block_num":{h},"timestamp":"2019-10-01T00:00:00.000","transactions":[]}}"#)
    }

    fn write_range(dir: &Path, first: u64, last: u64, skip: &[u64]) {
        let lines: BTreeMap<u64, String> = (first..=last).filter(|h| !skip.contains(h)).map(|h| (h, line(h))).collect();
        let path = dir.join(chunk_file_name(ChainId::Eosio, first, last));
        write_partial_chunk(ChainId::Eosio, HeightRange::new(first, last), &lines, &path).unwrap();
    }

    fn glob(dir: &Path) -> String {
        format!("{}/eos_blocks-*.jsonl.gz", dir.display())
    }

    #[test]
    fn chunk_names_roundtrip() {
        let n = chunk_file_name(ChainId::Xrpl, 50399027, 50409026);
        assert_eq!(n, "xrp_blocks-50399027-50409026.jsonl.gz");
        assert_eq!(parse_chunk_name(&n), Some((ChainId::Xrpl, HeightRange::new(50399027, 50409026))));
        assert_eq!(parse_chunk_name("eos_blocks-5-1.jsonl.gz"), None);
        assert_eq!(parse_chunk_name("notes.txt"), None);
    }

    #[test]
    fn wildcard() {
        assert!(wildcard_match(b"eos_blocks-*.jsonl.gz", b"eos_blocks-1-10.jsonl.gz"));
        assert!(!wildcard_match(b"eos_blocks-*.jsonl.gz", b"xrp_blocks-1-10.jsonl.gz"));
        assert!(wildcard_match(b"*", b""));
        assert!(wildcard_match(b"a?c", b"abc"));
    }

    #[test]
    fn hundred_blocks_one_chunk() {
        let dir = tempfile::tempdir().unwrap();
        let lines: Vec<_> = (1..=100).map(|h| (h, line(h))).collect();
        let path = dir.path().join(chunk_file_name(ChainId::Eosio, 1, 100));
        let chunk = write_chunk(ChainId::Eosio, &lines, &path).unwrap();
        assert_eq!(chunk.line_count, 100);
        assert!(chunk.is_complete());
        let back = read_chunk_lines(&path).unwrap();
        assert_eq!(back, lines.iter().map(|(_, l)| l.clone()).collect::<Vec<_>>());
    }

    #[test]
    fn gap_is_non_contiguous() {
        let dir = tempfile::tempdir().unwrap();
        let lines: Vec<_> = [5, 6, 8].into_iter().map(|h| (h, line(h))).collect();
        let err = write_chunk(ChainId::Eosio, &lines, &dir.path().join("x.jsonl.gz")).unwrap_err();
        assert!(matches!(err, StorageError::NonContiguous { expected: 7, found: 8 }));
    }

    #[test]
    fn file_is_gzip_with_lf_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(chunk_file_name(ChainId::Eosio, 1, 2));
        write_chunk(ChainId::Eosio, &[(1, line(1)), (2, line(2))], &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[..2], &[0x1f, 0x8b]);
        let mut raw = String::new();
        std::io::Read::read_to_string(&mut MultiGzDecoder::new(&bytes[..]), &mut raw).unwrap();
        assert_eq!(raw, format!("{}\n{}\n", line(1), line(2)));
    }

    #[test]
    fn scan_ranges() {
        let dir = tempfile::tempdir().unwrap();
        for k in 0..3 {
            write_range(dir.path(), 10 * k + 1, 10 * k + 10, &[]);
        }
        let all: Vec<_> = scan(&ArchivePattern::new(glob(dir.path()), 1, 30)).unwrap().collect::<Result<_, _>>().unwrap();
        assert_eq!(all.len(), 30);
        let part: Vec<u64> = scan(&ArchivePattern::new(glob(dir.path()), 15, 24))
            .unwrap()
            .map(|r| r.unwrap().0)
            .collect();
        assert_eq!(part, (15..=24).collect::<Vec<_>>());
        let err = scan(&ArchivePattern::new(glob(dir.path()), 25, 40)).err().unwrap();
        assert!(matches!(err, StorageError::MissingChunk { start: 31, end: 40 }));
    }

    #[test]
    fn integrity_reports_gaps_and_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        write_range(dir.path(), 1, 10, &[7, 8, 9]);
        write_range(dir.path(), 11, 20, &[]);
        let p = ArchivePattern::new(glob(dir.path()), 1, 20);
        assert_eq!(check_integrity(&p).unwrap(), vec![HeightRange::new(7, 9)]);
        assert_eq!(check_integrity(&ArchivePattern::new(glob(dir.path()), 11, 20)).unwrap(), vec![]);
        assert_eq!(check_integrity(&ArchivePattern::new(glob(dir.path()), 15, 25)).unwrap(), vec![HeightRange::new(21, 25)]);

        write_range(dir.path(), 20, 22, &[]);
        let err = check_integrity(&ArchivePattern::new(glob(dir.path()), 11, 22)).unwrap_err();
        assert!(matches!(err, StorageError::DuplicateHeight { heights } if heights == vec![20]));
    }

    #[test]
    fn corrupt_chunk_is_fatal() {
        let dir = tempfile::tempdir().unwrap();
        write_range(dir.path(), 1, 10, &[]);
        let path = dir.path().join(chunk_file_name(ChainId::Eosio, 1, 10));
        let mut bytes = fs::read(&path).unwrap();
        let n = bytes.len();
        bytes.truncate(n / 2);
        fs::write(&path, bytes).unwrap();
        let r: Result<Vec<_>, _> = scan(&ArchivePattern::new(glob(dir.path()), 1, 10)).unwrap().collect();
        assert!(matches!(r, Err(StorageError::Corrupt { .. })));
    }

    #[test]
    fn writer_merges_into_partial_chunk() {
        let dir = tempfile::tempdir().unwrap();
        let w = ArchiveWriter::new(dir.path(), ChainId::Eosio, 10);
        let first: BTreeMap<u64, String> = (1..=10).filter(|h| *h != 7).map(|h| (h, line(h))).collect();
        let c = w.store(HeightRange::new(1, 10), first).unwrap();
        assert_eq!(c.line_count, 9);
        assert_eq!(w.missing(1, 10).unwrap(), vec![HeightRange::new(7, 7)]);
        let existing = w.existing_chunks().unwrap();
        assert_eq!(w.target_chunk(&existing, 1, 100, 7), HeightRange::new(1, 10));
        assert_eq!(w.target_chunk(&existing, 1, 100, 15), HeightRange::new(11, 20));
        let c = w.store(HeightRange::new(1, 10), BTreeMap::from([(7, line(7))])).unwrap();
        assert!(c.is_complete());
        assert!(w.missing(1, 10).unwrap().is_empty());
    }

    #[test]
    fn ranges_collapse() {
        assert_eq!(to_ranges([1, 2, 3, 7, 9, 10]), vec![HeightRange::new(1, 3), HeightRange::new(7, 7), HeightRange::new(9, 10)]);
        assert_eq!(missing_from_sorted(&[2, 3], HeightRange::new(1, 5)), vec![HeightRange::new(1, 1), HeightRange::new(4, 5)]);
    }
}
