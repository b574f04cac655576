//! Configurable processing pipeline over an archive.
//!
//! Chunks are decoded and folded on a worker pool; per-chunk accumulators are
//! then merged in chunk order, so the output is the same for any worker
//! count.

pub mod accum;
pub mod config;
pub mod results;
pub mod window;

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;

pub use accum::Accumulator;
pub use config::{ConfigError, PipelineConfig, ProcessorKind, ProcessorSpec};
pub use results::{ProcessorResult, ResultData};
pub use window::Window;

use crate::adapters::{parse_block, peek_height, ClassificationRules, ParseError};
use crate::model::{ActionCategory, Block, ChainId};
use crate::storage::{self, ArchivePattern, ChunkRef, HeightRange, StorageError};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error("no chunk files match {0}")]
    NoChunks(String),
    #[error("{path}, line {line}: {source}")]
    Malformed { path: PathBuf, line: usize, source: ParseError },
    #[error("missing blocks: {}", fmt_ranges(.0))]
    Gaps(Vec<HeightRange>),
    #[error("blocks stored more than once: {0:?}")]
    Duplicate(Vec<u64>),
    #[error("worker pool: {0}")]
    Pool(String),
}

fn fmt_ranges(r: &[HeightRange]) -> String {
    let shown: Vec<String> = r.iter().take(10).map(ToString::to_string).collect();
    let more = if r.len() > 10 { format!(" and {} more", r.len() - 10) } else { String::new() };
    format!("{}{more}", shown.join(", "))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PipelineOptions {
    pub workers: usize,
    /// Abort on the first malformed line instead of skipping it.
    pub strict: bool,
    /// Process what is there when heights are missing.
    pub allow_gaps: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions { workers: default_workers(), strict: false, allow_gaps: false }
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunStats {
    pub chunks: usize,
    pub blocks: u64,
    pub actions: u64,
    pub skipped_lines: u64,
    /// Heights absent from the archive (only non-empty with `allow_gaps`).
    pub missing: Vec<HeightRange>,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub chain: ChainId,
    pub results: Vec<ProcessorResult>,
    pub stats: RunStats,
}

/// The validated processors of one run.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub chain: ChainId,
    pub specs: Vec<ProcessorSpec>,
    pub rules: ClassificationRules,
    needs_categories: bool,
}

/// Everything needed to run a configuration file.
#[derive(Debug, Clone)]
pub struct PreparedRun {
    pub pipeline: Pipeline,
    pub pattern: ArchivePattern,
    pub options: PipelineOptions,
}

impl PreparedRun {
    pub fn from_config(cfg: &PipelineConfig, base_dir: &Path) -> Result<Self, PipelineError> {
        let pattern = cfg.pattern(base_dir);
        let chain = match cfg.chain()? {
            Some(c) => c,
            None => storage::list_chunks(&pattern.glob)?
                .first()
                .map(|c| c.chain)
                .ok_or_else(|| PipelineError::NoChunks(pattern.glob.clone()))?,
        };
        let pipeline = Pipeline::new(chain, cfg.specs(base_dir)?, cfg.rules(chain, base_dir)?);
        let mut options = PipelineOptions::default();
        if let Some(w) = cfg.workers {
            options.workers = w.max(1);
        }
        options.strict = cfg.strict.unwrap_or(false);
        options.allow_gaps = cfg.allow_gaps.unwrap_or(false);
        Ok(PreparedRun { pipeline, pattern, options })
    }

    pub fn run(&self) -> Result<PipelineOutput, PipelineError> {
        self.pipeline.run(&self.pattern, self.options)
    }
}

struct ChunkOutcome {
    accs: Vec<Accumulator>,
    heights: Vec<u64>,
    blocks: u64,
    actions: u64,
    skipped: u64,
}

impl Pipeline {
    pub fn new(chain: ChainId, specs: Vec<ProcessorSpec>, rules: ClassificationRules) -> Self {
        let needs_categories = specs.iter().any(|s| s.kind.needs_categories());
        Pipeline { chain, specs, rules, needs_categories }
    }

    pub fn accumulators(&self) -> Vec<Accumulator> {
        self.specs.iter().map(|s| Accumulator::new(&s.kind)).collect()
    }

    pub fn observe(&self, accs: &mut [Accumulator], block: &Block) {
        let categories: Vec<ActionCategory> = if self.needs_categories {
            block.actions.iter().map(|a| self.rules.lookup(&a.receiver, &a.name)).collect()
        } else {
            Vec::new()
        };
        for (acc, spec) in accs.iter_mut().zip(&self.specs) {
            acc.observe(&spec.kind, block, &categories);
        }
    }

    pub fn merge(accs: &mut [Accumulator], other: Vec<Accumulator>) {
        for (a, b) in accs.iter_mut().zip(other) {
            a.merge(b);
        }
    }

    pub fn finish(&self, accs: Vec<Accumulator>) -> Vec<ProcessorResult> {
        accs.into_iter()
            .zip(&self.specs)
            .map(|(acc, spec)| ProcessorResult {
                name: spec.name.clone(),
                processor_type: spec.kind.type_name().into(),
                chain: self.chain,
                params: config::describe(&spec.kind),
                data: acc.finish(&spec.kind, self.chain),
            })
            .collect()
    }

    /// Runs over in-memory blocks; the reference the archive run must match.
    pub fn run_blocks<'a>(&self, blocks: impl IntoIterator<Item = &'a Block>) -> Vec<ProcessorResult> {
        let mut accs = self.accumulators();
        for b in blocks {
            self.observe(&mut accs, b);
        }
        self.finish(accs)
    }

    pub fn run(&self, pattern: &ArchivePattern, opts: PipelineOptions) -> Result<PipelineOutput, PipelineError> {
        let started = Instant::now();
        let range = pattern.range();
        let chunks = if opts.allow_gaps {
            storage::list_chunks(&pattern.glob)?
                .into_iter()
                .filter(|c| c.range.end >= range.start && c.range.start <= range.end)
                .collect()
        } else {
            storage::covering_chunks(pattern)?
        };
        if chunks.iter().any(|c| c.chain != self.chain) {
            return Err(PipelineError::Storage(StorageError::MixedChains));
        }

        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.workers.max(1))
            .build()
            .map_err(|e| PipelineError::Pool(e.to_string()))?;

        let mut accs = self.accumulators();
        let mut stats = RunStats { chunks: chunks.len(), ..RunStats::default() };
        let mut heights = Vec::new();
        // Bounded batches keep at most a few chunk accumulators alive at once.
        let batch = opts.workers.max(1) * 2;
        for group in chunks.chunks(batch) {
            let outcomes: Vec<Result<ChunkOutcome, PipelineError>> =
                pool.install(|| group.par_iter().map(|c| self.process_chunk(c, range, opts.strict)).collect());
            for o in outcomes {
                let o = o?;
                Self::merge(&mut accs, o.accs);
                heights.extend(o.heights);
                stats.blocks += o.blocks;
                stats.actions += o.actions;
                stats.skipped_lines += o.skipped;
            }
        }

        heights.sort_unstable();
        let dups: Vec<u64> = heights.windows(2).filter(|w| w[0] == w[1]).map(|w| w[0]).collect();
        if !dups.is_empty() {
            let mut dups = dups;
            dups.dedup();
            return Err(PipelineError::Duplicate(dups));
        }
        stats.missing = storage::missing_from_sorted(&heights, range);
        if !stats.missing.is_empty() && !opts.allow_gaps {
            return Err(PipelineError::Gaps(stats.missing));
        }

        let results = self.finish(accs);
        stats.elapsed = started.elapsed();
        Ok(PipelineOutput { chain: self.chain, results, stats })
    }

    fn process_chunk(&self, chunk: &ChunkRef, range: HeightRange, strict: bool) -> Result<ChunkOutcome, PipelineError> {
        let lines = storage::read_chunk_lines(&chunk.path)?;
        let mut out = ChunkOutcome { accs: self.accumulators(), heights: Vec::with_capacity(lines.len()), blocks: 0, actions: 0, skipped: 0 };
        for (i, line) in lines.iter().enumerate() {
            let block = match parse_block(self.chain, line.as_bytes()) {
                Ok(b) => b,
                Err(source) if strict => {
                    return Err(PipelineError::Malformed { path: chunk.path.clone(), line: i + 1, source });
                }
                Err(_) => {
                    // The block is present but unreadable: count it as
                    // stored so it is not reported as a gap.
                    if let Ok(h) = peek_height(self.chain, line.as_bytes()) {
                        if range.contains(h) {
                            out.heights.push(h);
                            out.skipped += 1;
                        }
                    } else {
                        out.skipped += 1;
                    }
                    continue;
                }
            };
            if !range.contains(block.height) {
                continue;
            }
            out.heights.push(block.height);
            out.blocks += 1;
            out.actions += block.actions.len() as u64;
            self.observe(&mut out.accs, &block);
        }
        Ok(out)
    }
}
