//! `txstats`: fetch, check, process and export blockchain transaction data.
//!
//! Exit codes: 0 success, 1 configuration error, 2 network error, 3 archive
//! integrity error, 4 internal error.

mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use txstats::adapters::{fetch_blocks, EndpointSpec, FetchError};
use txstats::export::{self, ExportError};
use txstats::processors::{PipelineConfig, PipelineError, PreparedRun};
use txstats::storage::{self, to_ranges, ArchivePattern, ArchiveWriter, StorageError, DEFAULT_CHUNK_SIZE};
use txstats::ChainId;

use manifest::{sha256_hex, OutputEntry, RunManifest};

#[derive(Parser)]
#[command(name = "txstats", version, about = "Transaction analytics for EOSIO, Tezos and the XRP Ledger")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Download blocks into a chunked archive; resumes where it left off.
    Fetch(FetchArgs),
    /// Report heights missing from an archive.
    Check(CheckArgs),
    /// Run the processors of a pipeline configuration.
    Process(ProcessArgs),
    /// Turn result files into the reporting tables.
    Export(ExportArgs),
}

#[derive(Args)]
struct FetchArgs {
    /// eos, tezos or xrp.
    #[arg(long)]
    chain: ChainId,
    /// Node URL. TXSTATS_<CHAIN>_ENDPOINT (e.g. TXSTATS_XRPL_ENDPOINT)
    /// overrides it.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    start: u64,
    #[arg(long)]
    end: u64,
    /// Archive directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_CHUNK_SIZE)]
    chunk_size: u64,
    /// Requests per second.
    #[arg(long, default_value_t = 10.0)]
    rate_limit: f64,
    #[arg(long, default_value_t = 3)]
    max_retries: u32,
    /// Per-request timeout in seconds.
    #[arg(long, default_value_t = 30)]
    timeout: u64,
}

#[derive(Args)]
struct CheckArgs {
    /// Chunk file pattern, e.g. `archive/eos_blocks-*.jsonl.gz`.
    pattern: String,
    #[arg(long)]
    start: u64,
    #[arg(long)]
    end: u64,
}

#[derive(Args)]
struct ProcessArgs {
    /// Pipeline configuration file.
    config: PathBuf,
    /// Directory for result files.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Abort on the first malformed block line.
    #[arg(long)]
    strict: bool,
    /// Worker threads (default: available cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Process what is present when heights are missing.
    #[arg(long)]
    allow_gaps: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct ExportArgs {
    /// Results directory written by `process`, or a JSON results file.
    #[arg(long)]
    results: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Only these tables (e.g. `distribution`, `flows.csv`); each must have
    /// a result to export.
    #[arg(long = "table")]
    tables: Vec<String>,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Network(String),
    Integrity(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Network(_) => 2,
            Failure::Integrity(_) => 3,
            Failure::Internal(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Network(m) | Failure::Integrity(m) | Failure::Internal(m) => m,
        }
    }
}

fn storage_failure(e: StorageError) -> Failure {
    match e {
        StorageError::Io { .. } => Failure::Internal(e.to_string()),
        StorageError::BadPattern(_) => Failure::Config(e.to_string()),
        _ => Failure::Integrity(e.to_string()),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| Failure::Internal(format!("{}: {e}", path.display())))
}

fn fetch(args: FetchArgs) -> Result<(), Failure> {
    let var = format!("TXSTATS_{}_ENDPOINT", args.chain.as_str());
    let url = std::env::var(&var)
        .ok()
        .filter(|v| !v.is_empty())
        .or(args.endpoint)
        .ok_or_else(|| Failure::Config(format!("no endpoint: pass --endpoint or set {var}")))?;
    if args.chunk_size == 0 {
        return Err(Failure::Config("--chunk-size must be at least 1".into()));
    }
    let endpoint = EndpointSpec {
        rate_limit: args.rate_limit,
        max_retries: args.max_retries,
        timeout: Duration::from_secs(args.timeout.max(1)),
        ..EndpointSpec::new(args.chain, url.clone())
    };
    fs::create_dir_all(&args.out).map_err(|e| Failure::Internal(format!("{}: {e}", args.out.display())))?;
    let archive = ArchiveWriter::new(&args.out, args.chain, args.chunk_size);
    let summary = fetch_blocks(&endpoint, args.start, args.end, &archive).map_err(|e| match e {
        FetchError::InvalidEndpoint(_) | FetchError::InvalidRange { .. } => Failure::Config(e.to_string()),
        FetchError::EndpointUnavailable { .. } => Failure::Network(e.to_string()),
        FetchError::Storage(s) => storage_failure(s),
    })?;
    println!("{}", serde_json::to_string(&summary).expect("summary serializes"));
    if !summary.failures.is_empty() {
        let ranges: Vec<String> = to_ranges(summary.failures.iter().copied()).iter().map(ToString::to_string).collect();
        return Err(Failure::Network(format!(
            "{url}: {} blocks could not be fetched ({}); rerun to resume",
            summary.failures.len(),
            ranges.join(", ")
        )));
    }
    Ok(())
}

fn check(args: CheckArgs) -> Result<(), Failure> {
    if args.start > args.end {
        return Err(Failure::Config(format!("--start {} is after --end {}", args.start, args.end)));
    }
    let missing = storage::check_integrity(&ArchivePattern::new(args.pattern, args.start, args.end)).map_err(storage_failure)?;
    let shown: Vec<String> = missing.iter().map(ToString::to_string).collect();
    println!("{}", serde_json::json!({ "missing": shown }));
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Failure::Integrity(format!("missing blocks: {}", shown.join(", "))))
    }
}

/// File-system friendly form of a processor name.
fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' }).collect()
}

fn process(args: ProcessArgs) -> Result<(), Failure> {
    let config_bytes = fs::read(&args.config).map_err(|e| Failure::Config(format!("{}: {e}", args.config.display())))?;
    let text = String::from_utf8(config_bytes.clone()).map_err(|_| Failure::Config("configuration is not UTF-8".into()))?;
    let cfg = PipelineConfig::from_json(&text).map_err(|e| Failure::Config(format!("{}: {e}", args.config.display())))?;
    let base_dir = args.config.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut run = PreparedRun::from_config(&cfg, &base_dir).map_err(|e| match e {
        PipelineError::Config(c) => Failure::Config(format!("{}: {c}", args.config.display())),
        PipelineError::Storage(s) => storage_failure(s),
        PipelineError::NoChunks(_) => Failure::Integrity(e.to_string()),
        other => Failure::Internal(other.to_string()),
    })?;
    if let Some(w) = args.workers {
        run.options.workers = w.max(1);
    }
    run.options.strict |= args.strict;
    run.options.allow_gaps |= args.allow_gaps;

    let output = run.run().map_err(|e| match e {
        PipelineError::Config(c) => Failure::Config(c.to_string()),
        PipelineError::Storage(s) => storage_failure(s),
        PipelineError::Pool(_) => Failure::Internal(e.to_string()),
        _ => Failure::Integrity(e.to_string()),
    })?;

    fs::create_dir_all(&args.out).map_err(|e| Failure::Internal(format!("{}: {e}", args.out.display())))?;
    let mut outputs = Vec::new();
    for r in &output.results {
        let stem = file_stem(&r.name);
        let json = serde_json::to_string_pretty(r).map_err(|e| Failure::Internal(e.to_string()))? + "\n";
        let csv = export::result_csv(r).map_err(|e| Failure::Internal(e.to_string()))?;
        let (json_path, csv_path) = (args.out.join(format!("{stem}.json")), args.out.join(format!("{stem}.csv")));
        write_file(&json_path, json.as_bytes())?;
        write_file(&csv_path, csv.as_bytes())?;
        outputs.push(OutputEntry {
            processor: r.name.clone(),
            processor_type: r.processor_type.clone(),
            json: json_path.display().to_string(),
            json_sha256: sha256_hex(json.as_bytes()),
            csv: csv_path.display().to_string(),
            csv_sha256: sha256_hex(csv.as_bytes()),
        });
    }
    let stats = &output.stats;
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        config: args.config.display().to_string(),
        config_sha256: sha256_hex(&config_bytes),
        chain: output.chain,
        pattern: run.pattern.glob.clone(),
        start_block: run.pattern.start,
        end_block: run.pattern.end,
        workers: run.options.workers,
        strict: run.options.strict,
        allow_gaps: run.options.allow_gaps,
        chunks: stats.chunks,
        blocks: stats.blocks,
        actions: stats.actions,
        skipped_lines: stats.skipped_lines,
        missing: stats.missing.iter().map(ToString::to_string).collect(),
        duration_secs: stats.elapsed.as_secs_f64(),
        outputs,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Failure::Internal(e.to_string()))? + "\n";
    write_file(&args.out.join(export::MANIFEST_FILE), text.as_bytes())?;
    eprintln!(
        "processed {} blocks ({} actions, {} skipped lines) into {} result(s) in {:.1}s",
        stats.blocks,
        stats.actions,
        stats.skipped_lines,
        output.results.len(),
        stats.elapsed.as_secs_f64()
    );
    Ok(())
}

fn export_cmd(args: ExportArgs) -> Result<(), Failure> {
    if !args.results.exists() {
        return Err(Failure::Config(format!("{}: no such results", args.results.display())));
    }
    let to_failure = |e: ExportError| match e {
        ExportError::Io { .. } | ExportError::Csv(_) => Failure::Internal(e.to_string()),
        _ => Failure::Config(e.to_string()),
    };
    let results = export::load_results(&args.results).map_err(to_failure)?;
    match args.format {
        Format::Csv => {
            let only = (!args.tables.is_empty()).then_some(args.tables.as_slice());
            for p in export::export_tables(&results, &args.out, only).map_err(to_failure)? {
                println!("{}", p.display());
            }
        }
        Format::Json => {
            let path = args.out.join("results.json");
            export::export_json(&results, &path).map_err(to_failure)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Fetch(a) => fetch(a),
        Command::Check(a) => check(a),
        Command::Process(a) => process(a),
        Command::Export(a) => export_cmd(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("txstats: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_stems() {
        assert_eq!(file_stem("Grouped Actions/6h"), "Grouped_Actions_6h");
        assert_eq!(file_stem("TransactionsCount"), "TransactionsCount");
    }
}
