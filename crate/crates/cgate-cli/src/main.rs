//! `cgate` — compliance auditing for web-crawled training corpora.
//!
//! One binary, nine subcommands, four exit codes:
//!
//! * `parse-robots` — answer one allow/deny question against a robots.txt
//! * `timeline` — retrieve archived robots.txt snapshots and chart when
//!   domains began blocking listed crawlers
//! * `filter` — partition an NDJSON corpus into compliant / non-compliant
//! * `exclude` — remove listed registrable domains from a corpus
//! * `stats` — top-k removal table from a partition summary
//! * `overlap` — n-gram overlap between a corpus and target document sets
//! * `memorize-score` — verbatim-memorization metrics over generation pairs
//! * `score-mcq` — accuracy of predictions over a multiple-choice benchmark
//! * `dcg` — signed benchmark gap between two evaluation runs
//!
//! Exit codes: 0 success, 1 usage error, 2 input error, 3 network error.
//! Diagnostics go to standard error; data goes to files, or to standard
//! output only when no output file was requested — never both.
//!
//! Configuration precedence: command-line flags beat environment variables
//! (`CGATE_CACHE_DIR`, `CGATE_BLOCKLIST`, `CGATE_JOBS`), which beat the
//! config file (`--config` or `CGATE_CONFIG`; flat `key = value` lines),
//! which beats built-in defaults.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use cgate_core::blocklist::Blocklist;
use cgate_core::corpus::{self, PartitionMode, PartitionOptions, PolicySource, Verdict};
use cgate_core::metrics;
use cgate_core::month::Month;
use cgate_core::ndjson::NdjsonReader;
use cgate_core::overlap::{NgramIndex, ScanOptions};
use cgate_core::rep::{self, DecideOptions, Decision};
use cgate_core::report::{self, ReportFormat};
use cgate_core::timeline::{
    self, ArchiveConfig, ArchiveEndpoint, ArchiveError, Capture, FetchOptions, FetchReport,
    FetchedBody, HttpArchive, SnapshotCache,
};
use cgate_core::tokenize::TokenizerConfig;

const EXIT_OK: i32 = 0;
const EXIT_USAGE: i32 = 1;
const EXIT_INPUT: i32 = 2;
const EXIT_NETWORK: i32 = 3;

// ---------------------------------------------------------------------------
// Error plumbing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ExitKind {
    Usage,
    Input,
    Network,
}

impl ExitKind {
    fn code(self) -> i32 {
        match self {
            ExitKind::Usage => EXIT_USAGE,
            ExitKind::Input => EXIT_INPUT,
            ExitKind::Network => EXIT_NETWORK,
        }
    }
}

#[derive(Debug)]
struct AppError {
    kind: ExitKind,
    err: anyhow::Error,
}

impl AppError {
    fn usage(msg: impl Into<String>) -> Self {
        AppError {
            kind: ExitKind::Usage,
            err: anyhow!(msg.into()),
        }
    }

    fn input(err: impl Into<anyhow::Error>) -> Self {
        AppError {
            kind: ExitKind::Input,
            err: err.into(),
        }
    }

    fn network(err: impl Into<anyhow::Error>) -> Self {
        AppError {
            kind: ExitKind::Network,
            err: err.into(),
        }
    }
}

type AppResult<T> = Result<T, AppError>;

/// Attach a path-naming message to a failed read or write and classify it
/// as an input error.
trait InputPath<T> {
    fn input_path(self, action: &str, path: &Path) -> AppResult<T>;
}

impl<T, E: Into<anyhow::Error> + Send + Sync + 'static> InputPath<T> for Result<T, E>
where
    E: std::error::Error,
{
    fn input_path(self, action: &str, path: &Path) -> AppResult<T> {
        self.map_err(|e| {
            AppError::input(
                anyhow::Error::from(e).context(format!("failed to {action} {}", path.display())),
            )
        })
    }
}

// ---------------------------------------------------------------------------
// Logging
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
enum LogLevel {
    Error,
    Warn,
    Info,
    Debug,
}

#[derive(Debug, Clone, Copy)]
struct Logger {
    level: LogLevel,
}

impl Logger {
    fn warn(&self, msg: impl AsRef<str>) {
        if self.level >= LogLevel::Warn {
            eprintln!("warn: {}", msg.as_ref());
        }
    }

    fn info(&self, msg: impl AsRef<str>) {
        if self.level >= LogLevel::Info {
            eprintln!("info: {}", msg.as_ref());
        }
    }

    fn debug(&self, msg: impl AsRef<str>) {
        if self.level >= LogLevel::Debug {
            eprintln!("debug: {}", msg.as_ref());
        }
    }
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Settings merged from the config file and environment, consulted when a
/// flag was not given. Environment entries already override file entries.
#[derive(Debug, Default)]
struct Settings {
    cache_dir: Option<PathBuf>,
    blocklist: Option<PathBuf>,
    jobs: Option<usize>,
    cutoff: Option<String>,
    rps: Option<f64>,
    log_level: Option<LogLevel>,
    tokenizer: Option<TokenizerChoice>,
}

impl Settings {
    fn load(config_flag: Option<&Path>) -> AppResult<Self> {
        let mut s = Settings::default();

        let file = match config_flag {
            Some(path) => Some(path.to_path_buf()),
            None => std::env::var_os("CGATE_CONFIG").map(PathBuf::from),
        };
        if let Some(path) = file {
            let text = fs::read_to_string(&path).input_path("read config file", &path)?;
            s.apply_file(&text, &path)?;
        }

        if let Some(v) = env_string("CGATE_CACHE_DIR") {
            s.cache_dir = Some(absolutize(PathBuf::from(v)));
        }
        if let Some(v) = env_string("CGATE_BLOCKLIST") {
            s.blocklist = Some(absolutize(PathBuf::from(v)));
        }
        if let Some(v) = env_string("CGATE_JOBS") {
            s.jobs = Some(parse_jobs(&v).map_err(|e| AppError::usage(format!("CGATE_JOBS: {e}")))?);
        }
        Ok(s)
    }

    /// Apply one flat `key = value` config file (# comments, blank lines).
    fn apply_file(&mut self, text: &str, path: &Path) -> AppResult<()> {
        for (line_no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(AppError::usage(format!(
                    "{}:{}: expected `key = value`, got {:?}",
                    path.display(),
                    line_no + 1,
                    line
                )));
            };
            let key = key.trim();
            let value = value.trim().trim_matches('"');
            let bad = |e: String| {
                AppError::usage(format!("{}:{}: {key}: {e}", path.display(), line_no + 1))
            };
            match key {
                "cache_dir" => self.cache_dir = Some(absolutize(PathBuf::from(value))),
                "blocklist" => self.blocklist = Some(absolutize(PathBuf::from(value))),
                "jobs" => self.jobs = Some(parse_jobs(value).map_err(bad)?),
                "cutoff" => self.cutoff = Some(value.to_string()),
                "rps" => {
                    let rps: f64 = value
                        .parse()
                        .map_err(|_| bad(format!("not a number: {value:?}")))?;
                    if !(rps >= 0.0) {
                        return Err(bad(format!("must be >= 0, got {value:?}")));
                    }
                    self.rps = Some(rps);
                }
                "log_level" => {
                    self.log_level = Some(
                        LogLevel::from_str(value, true)
                            .map_err(|_| bad(format!("unknown level {value:?}")))?,
                    )
                }
                "tokenizer" => {
                    self.tokenizer = Some(
                        TokenizerChoice::from_str(value, true)
                            .map_err(|_| bad(format!("unknown tokenizer {value:?}")))?,
                    )
                }
                other => {
                    return Err(AppError::usage(format!(
                        "{}:{}: unknown config key {other:?}",
                        path.display(),
                        line_no + 1
                    )));
                }
            }
        }
        Ok(())
    }
}

fn env_string(name: &str) -> Option<String> {
    match std::env::var(name) {
        Ok(v) if !v.trim().is_empty() => Some(v.trim().to_string()),
        _ => None,
    }
}

fn parse_jobs(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(format!("worker count must be a positive integer, got {s:?}")),
    }
}

/// Resolve a path to absolute against the current directory, without
/// touching the filesystem (the target may not exist yet).
fn absolutize(p: PathBuf) -> PathBuf {
    if p.is_absolute() {
        p
    } else {
        match std::env::current_dir() {
            Ok(cwd) => cwd.join(p),
            Err(_) => p,
        }
    }
}

/// Parse a policy cutoff: a calendar date `YYYY-MM-DD`, or a bare `YYYY-MM`
/// meaning the end of that month. Returns the cutoff month.
fn parse_cutoff(s: &str) -> Result<Month, String> {
    if let Ok(month) = s.parse::<Month>() {
        return Ok(month);
    }
    let (month_part, day_part) = s
        .split_at_checked(7)
        .ok_or_else(|| format!("cutoff must be YYYY-MM-DD or YYYY-MM, got {s:?}"))?;
    let month = month_part
        .parse::<Month>()
        .map_err(|e| format!("bad cutoff {s:?}: {e}"))?;
    let day = day_part
        .strip_prefix('-')
        .and_then(|d| if d.len() == 2 { d.parse::<u8>().ok() } else { None })
        .ok_or_else(|| format!("cutoff must be YYYY-MM-DD or YYYY-MM, got {s:?}"))?;
    if day == 0 || day > month.days() {
        return Err(format!("cutoff day {day} out of range for {month}"));
    }
    Ok(month)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TokenizerChoice {
    /// Case- and punctuation-preserving split on Unicode whitespace.
    Counting,
    /// Case-folded split with edge punctuation stripped.
    Matching,
}

impl TokenizerChoice {
    fn config(self) -> TokenizerConfig {
        match self {
            TokenizerChoice::Counting => TokenizerConfig::counting(),
            TokenizerChoice::Matching => TokenizerConfig::matching(),
        }
    }
}

// ---------------------------------------------------------------------------
// Command-line surface
// ---------------------------------------------------------------------------

/// Compliance auditing for web-crawled training corpora.
#[derive(Debug, Parser)]
#[command(name = "cgate", version, max_term_width = 100)]
struct Cli {
    /// Flat key=value config file (lowest-precedence settings).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Diagnostic verbosity on standard error.
    #[arg(long, global = true, value_name = "LEVEL")]
    log_level: Option<LogLevel>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Answer one allow/deny question against a robots.txt file.
    ParseRobots(ParseRobotsArgs),
    /// Fetch archived robots.txt snapshots and build block timelines.
    Timeline(TimelineArgs),
    /// Partition an NDJSON corpus into compliant and non-compliant files.
    Filter(FilterArgs),
    /// Remove documents whose registrable domain is on a list.
    Exclude(ExcludeArgs),
    /// Summarize a partition: top-k domains by documents removed.
    Stats(StatsArgs),
    /// Count corpus documents sharing n-token windows with target sets.
    Overlap(OverlapArgs),
    /// Score generation/reference pairs for verbatim memorization.
    MemorizeScore(MemorizeScoreArgs),
    /// Score multiple-choice predictions against a benchmark file.
    ScoreMcq(ScoreMcqArgs),
    /// Compute the signed benchmark gap between two evaluation runs.
    Dcg(DcgArgs),
}

#[derive(Debug, Args)]
struct ParseRobotsArgs {
    /// robots.txt file to parse.
    #[arg(long, value_name = "FILE")]
    file: PathBuf,
    /// User agent product token to query (`*` queries the default group).
    #[arg(long, value_name = "AGENT")]
    agent: String,
    /// URL path to test, beginning with `/`.
    #[arg(long, value_name = "PATH")]
    path: String,
    /// HTTP status the file was fetched with, when simulating a fetch
    /// (4xx allows everything, 5xx disallows everything).
    #[arg(long, value_name = "CODE")]
    status: Option<u16>,
    /// Treat 5xx/unreadable policies as allowing instead of disallowing.
    #[arg(long)]
    unreachable_allows: bool,
    /// Print the normalized robots.txt instead of a decision.
    #[arg(long)]
    normalize: bool,
}

#[derive(Debug, Args)]
struct TimelineArgs {
    /// Domain list file: one registrable domain per line, `#` comments.
    #[arg(long, value_name = "FILE")]
    domains: PathBuf,
    /// First month to cover, `YYYY-MM`.
    #[arg(long, value_name = "YYYY-MM")]
    from: String,
    /// Last month to cover, `YYYY-MM` (inclusive).
    #[arg(long, value_name = "YYYY-MM")]
    to: String,
    /// Crawler blocklist file (defaults to the built-in agent list).
    #[arg(long, value_name = "FILE")]
    blocklist: Option<PathBuf>,
    /// Snapshot cache directory (or CGATE_CACHE_DIR / config cache_dir).
    #[arg(long, value_name = "DIR")]
    cache: Option<PathBuf>,
    /// Never touch the network; report uncached months as errors.
    #[arg(long)]
    offline: bool,
    /// Politeness ceiling in archive requests per second (0 = unthrottled).
    #[arg(long, value_name = "N")]
    rps: Option<f64>,
    /// Archive base URL exposing `<base>/cdx` and `<base>/web` endpoints.
    #[arg(long, value_name = "URL")]
    archive_base: Option<String>,
    /// URL path probed against each month's policy.
    #[arg(long, value_name = "PATH", default_value = "/")]
    probe_path: String,
    /// Also write tab-separated plot data (`plot.tsv`).
    #[arg(long)]
    plot: bool,
    /// Output directory for `monthly.csv`, `first_blocks.csv`, and
    /// `fetch_report.json`.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct FilterArgs {
    /// Corpus NDJSON file (`.gz` accepted).
    #[arg(long, value_name = "FILE")]
    corpus: PathBuf,
    /// Policy source: a directory of `<domain>.robots.txt` files, or a
    /// snapshot cache directory (detected by its per-domain `index.json`
    /// files). Defaults to CGATE_CACHE_DIR / config cache_dir.
    #[arg(long, value_name = "DIR")]
    policies: Option<PathBuf>,
    /// Crawler blocklist file (defaults to the built-in agent list).
    #[arg(long, value_name = "FILE")]
    blocklist: Option<PathBuf>,
    /// Policy cutoff date (YYYY-MM-DD or YYYY-MM) when reading a snapshot
    /// cache: the latest snapshot at or before this month applies.
    #[arg(long, value_name = "DATE", default_value = "2025-01-31")]
    cutoff: String,
    /// Blocking scope: `path` removes a document only when its own URL path
    /// is disallowed; `domain` removes every document of a domain whose
    /// root is disallowed for any blocklisted agent.
    #[arg(long, value_enum, default_value_t = ModeChoice::Path)]
    mode: ModeChoice,
    /// Worker threads for verdict scoring (default: available parallelism).
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    jobs: Option<u64>,
    /// Treat 5xx/unreadable policies as allowing instead of disallowing.
    #[arg(long)]
    unreachable_allows: bool,
    /// Also write per-document verdicts (`verdicts.ndjson`).
    #[arg(long)]
    verdicts: bool,
    /// Output directory for `compliant.ndjson`, `noncompliant.ndjson`, and
    /// `summary.json`.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeChoice {
    Path,
    Domain,
}

#[derive(Debug, Args)]
struct ExcludeArgs {
    /// Corpus NDJSON file (`.gz` accepted).
    #[arg(long, value_name = "FILE")]
    corpus: PathBuf,
    /// Registrable-domain list file: one domain per line, `#` comments.
    #[arg(long, value_name = "FILE")]
    domains: PathBuf,
    /// Output directory for `kept.ndjson`, `excluded.ndjson`, and
    /// `summary.json`.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct StatsArgs {
    /// Partition directory produced by `filter` or `exclude` (reads its
    /// `summary.json`), or a summary JSON file directly.
    #[arg(long, value_name = "DIR|FILE")]
    partition: PathBuf,
    /// Number of domains to keep in the removal table.
    #[arg(long, value_name = "N", default_value_t = 20)]
    top_k: usize,
    /// Output CSV file (standard output when omitted).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OverlapArgs {
    /// Corpus NDJSON file (`.gz` accepted).
    #[arg(long, value_name = "FILE")]
    corpus: PathBuf,
    /// Target document sets as `name=path` entries, comma-separated or
    /// repeated (at most 64).
    #[arg(long, value_name = "NAME=PATH", value_delimiter = ',', required = true)]
    targets: Vec<String>,
    /// Window length in tokens.
    #[arg(long, value_name = "N", default_value_t = 50)]
    n: usize,
    /// Keep up to this many example matches in the JSON report.
    #[arg(long, value_name = "K", default_value_t = 0)]
    samples: usize,
    /// Re-compare raw token windows on every hash hit, rejecting collisions.
    #[arg(long)]
    verify: bool,
    /// Tokenizer preset for windows (default: matching).
    #[arg(long, value_enum)]
    tokenizer: Option<TokenizerChoice>,
    /// Also write the full report with sample windows as JSON.
    #[arg(long, value_name = "FILE")]
    json: Option<PathBuf>,
    /// Output CSV file (standard output when omitted).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MemorizeScoreArgs {
    /// Pairs NDJSON file: `article_id`, `prefix_tokens`, `reference`,
    /// `generation` per line.
    #[arg(long, value_name = "FILE")]
    pairs: PathBuf,
    /// Largest n-gram order used by the BLEU score.
    #[arg(long, value_name = "N", default_value_t = 4)]
    max_n: usize,
    /// Tokenizer preset for scoring (default: matching).
    #[arg(long, value_enum)]
    tokenizer: Option<TokenizerChoice>,
    /// Output JSON file (standard output when omitted).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScoreMcqArgs {
    /// Benchmark NDJSON file of multiple-choice items.
    #[arg(long, value_name = "FILE")]
    items: PathBuf,
    /// Predictions CSV: `id,label` rows, optional header.
    #[arg(long, value_name = "FILE")]
    preds: PathBuf,
    /// Output JSON file (standard output when omitted).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DcgArgs {
    /// Baseline evaluation result set (JSON), e.g. the compliant run.
    #[arg(long, value_name = "FILE")]
    baseline: PathBuf,
    /// Treatment evaluation result set (JSON), e.g. the non-compliant run.
    #[arg(long, value_name = "FILE")]
    treatment: PathBuf,
    /// Flag gaps with magnitude below this threshold as within noise.
    #[arg(long, value_name = "T")]
    noise: Option<f64>,
    /// Report format.
    #[arg(long, value_enum, default_value_t = FormatChoice::Csv)]
    format: FormatChoice,
    /// Output directory (standard output when omitted).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatChoice {
    Csv,
    Json,
    Plot,
}

impl FormatChoice {
    fn format(self) -> ReportFormat {
        match self {
            FormatChoice::Csv => ReportFormat::Csv,
            FormatChoice::Json => ReportFormat::Json,
            FormatChoice::Plot => ReportFormat::Plot,
        }
    }
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

fn main() {
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Usage problems land on stderr and exit 1; --help/--version
            // land on stdout and exit 0.
            let code = if err.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = err.print();
            return code;
        }
    };

    let settings = match Settings::load(cli.config.as_deref()) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let logger = Logger {
        level: cli
            .log_level
            .or(settings.log_level)
            .unwrap_or(LogLevel::Info),
    };

    match dispatch(cli.command, &settings, &logger) {
        Ok(()) => EXIT_OK,
        Err(e) => fail(e),
    }
}

fn fail(e: AppError) -> i32 {
    eprintln!("error: {:#}", e.err);
    e.kind.code()
}

fn dispatch(command: Command, settings: &Settings, log: &Logger) -> AppResult<()> {
    match command {
        Command::ParseRobots(args) => cmd_parse_robots(args, log),
        Command::Timeline(args) => cmd_timeline(args, settings, log),
        Command::Filter(args) => cmd_filter(args, settings, log),
        Command::Exclude(args) => cmd_exclude(args, log),
        Command::Stats(args) => cmd_stats(args),
        Command::Overlap(args) => cmd_overlap(args, settings, log),
        Command::MemorizeScore(args) => cmd_memorize_score(args, settings, log),
        Command::ScoreMcq(args) => cmd_score_mcq(args, log),
        Command::Dcg(args) => cmd_dcg(args, log),
    }
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

fn load_blocklist(flag: Option<&Path>, settings: &Settings, log: &Logger) -> AppResult<Blocklist> {
    let path = flag.map(Path::to_path_buf).or(settings.blocklist.clone());
    match path {
        Some(path) => {
            let list = Blocklist::load(&path).input_path("read blocklist", &path)?;
            if list.is_empty() {
                return Err(AppError::input(anyhow!(
                    "blocklist {} names no agents",
                    path.display()
                )));
            }
            log.debug(format!("blocklist: {} agents from {}", list.len(), path.display()));
            Ok(list)
        }
        None => {
            let list = Blocklist::default_agents();
            log.debug(format!("blocklist: built-in list of {} agents", list.len()));
            Ok(list)
        }
    }
}

fn create_out_dir(dir: &Path) -> AppResult<()> {
    fs::create_dir_all(dir).input_path("create output directory", dir)
}

fn write_file(path: &Path, bytes: &[u8]) -> AppResult<()> {
    fs::write(path, bytes).input_path("write", path)
}

/// Write to the named file, or to standard output when no file was named.
fn write_file_or_stdout(out: Option<&Path>, bytes: &[u8]) -> AppResult<()> {
    match out {
        Some(path) => write_file(path, bytes),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(bytes)
                .and_then(|()| lock.flush())
                .map_err(|e| AppError::input(anyhow::Error::from(e).context("writing to stdout")))
        }
    }
}

fn open_corpus(path: &Path, tokenizer: TokenizerConfig) -> AppResult<NdjsonReader> {
    NdjsonReader::open(path, tokenizer).input_path("open corpus", path)
}

fn parse_month_flag(value: &str, flag: &str) -> AppResult<Month> {
    value
        .parse::<Month>()
        .map_err(|e| AppError::usage(format!("--{flag}: {e}")))
}

// ---------------------------------------------------------------------------
// parse-robots
// ---------------------------------------------------------------------------

fn cmd_parse_robots(args: ParseRobotsArgs, log: &Logger) -> AppResult<()> {
    let bytes = fs::read(&args.file).input_path("read robots.txt", &args.file)?;
    let policy = rep::parse_robots(&bytes, args.status);

    let d = &policy.diagnostics;
    if d.malformed_lines > 0 || d.orphan_rules > 0 || d.truncated_patterns > 0 {
        log.debug(format!(
            "parse diagnostics: {} malformed lines, {} orphan rules, {} truncated patterns",
            d.malformed_lines, d.orphan_rules, d.truncated_patterns
        ));
    }

    if args.normalize {
        print!("{}", rep::to_robots_txt(&policy));
        return Ok(());
    }

    let opts = DecideOptions {
        unreachable_disallows: !args.unreachable_allows,
    };
    match rep::is_allowed_with(&policy, &args.agent, &args.path, opts) {
        Decision::Allowed => println!("Allowed"),
        Decision::Disallowed => println!("Disallowed"),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// timeline
// ---------------------------------------------------------------------------

/// Endpoint used with `--offline`: any attempt to touch the archive is a
/// hard error rather than a silent network call.
struct NoNetwork;

impl ArchiveEndpoint for NoNetwork {
    fn list_captures(&self, _url: &str, _month: Month) -> Result<Vec<Capture>, ArchiveError> {
        Err(ArchiveError::Network("offline mode".into()))
    }

    fn fetch_capture(&self, _capture: &Capture) -> Result<FetchedBody, ArchiveError> {
        Err(ArchiveError::Network("offline mode".into()))
    }
}

fn cmd_timeline(args: TimelineArgs, settings: &Settings, log: &Logger) -> AppResult<()> {
    let from = parse_month_flag(&args.from, "from")?;
    let to = parse_month_flag(&args.to, "to")?;
    if from > to {
        return Err(AppError::usage(format!(
            "--from {from} is after --to {to}"
        )));
    }
    let cache_dir = args
        .cache
        .or(settings.cache_dir.clone())
        .ok_or_else(|| {
            AppError::usage(
                "no snapshot cache directory: pass --cache, set CGATE_CACHE_DIR, \
                 or set cache_dir in the config file",
            )
        })?;
    let blocklist = load_blocklist(args.blocklist.as_deref(), settings, log)?;
    let domains = corpus::load_domain_list(&args.domains)
        .input_path("read domain list", &args.domains)?;
    if domains.is_empty() {
        return Err(AppError::input(anyhow!(
            "domain list {} names no domains",
            args.domains.display()
        )));
    }

    let cache = SnapshotCache::open(&absolutize(cache_dir));
    let mut archive_config = match &args.archive_base {
        Some(base) => ArchiveConfig::with_base(base),
        None => ArchiveConfig::default(),
    };
    archive_config.rps = args.rps.or(settings.rps).unwrap_or(archive_config.rps);
    let endpoint: Box<dyn ArchiveEndpoint> = if args.offline {
        Box::new(NoNetwork)
    } else {
        Box::new(HttpArchive::new(archive_config))
    };
    let fetch_opts = FetchOptions {
        offline: args.offline,
    };

    let mut reports: Vec<FetchReport> = Vec::new();
    let mut timelines = Vec::new();
    let mut total_fetched = 0u64;
    let mut total_hits = 0u64;
    let mut total_errors = 0usize;
    for domain in &domains {
        let report = timeline::fetch_snapshots(endpoint.as_ref(), &cache, domain, from, to, &fetch_opts)
            .input_path("update snapshot cache under", cache.root())?;
        log.info(format!(
            "{domain}: {} months fetched, {} from cache, {} errors",
            report.fetched,
            report.cache_hits,
            report.errors.len()
        ));
        for err in &report.errors {
            log.warn(format!("{domain} {}: {}", err.month, err.error));
        }
        if !report.domain_archived {
            log.warn(format!("{domain}: no archived capture in {from}..{to}"));
        }
        total_fetched += report.fetched;
        total_hits += report.cache_hits;
        total_errors += report.errors.len();

        let tl = timeline::build_timeline(&cache, &report.records, &blocklist, &args.probe_path)
            .input_path("read snapshot bodies under", cache.root())?;
        timelines.push(tl);
        reports.push(report);
    }

    let summary = timeline::timeline_report(&timelines);
    create_out_dir(&args.out)?;
    write_file(&args.out.join("monthly.csv"), summary.monthly_csv().as_bytes())?;
    write_file(
        &args.out.join("first_blocks.csv"),
        summary.first_blocks_csv().as_bytes(),
    )?;
    if args.plot {
        write_file(&args.out.join("plot.tsv"), summary.plot_data().as_bytes())?;
    }
    let fetch_json =
        serde_json::to_string_pretty(&reports).expect("fetch reports serialize") + "\n";
    write_file(&args.out.join("fetch_report.json"), fetch_json.as_bytes())?;

    log.info(format!(
        "{} domains: {total_fetched} months fetched, {total_hits} from cache, {total_errors} errors → {}",
        domains.len(),
        args.out.display()
    ));

    // Every needed fetch failed and nothing was retrieved: the archive was
    // unreachable. Partial success stays exit 0 with warnings above.
    if !args.offline && total_errors > 0 && total_fetched == 0 {
        return Err(AppError::network(anyhow!(
            "all {total_errors} archive requests failed; cache not updated"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// filter
// ---------------------------------------------------------------------------

/// A snapshot cache holds per-domain subdirectories with an `index.json`;
/// a plain policy directory holds `<domain>.robots.txt` files directly.
fn detect_cache_layout(dir: &Path) -> std::io::Result<bool> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() && path.join("index.json").is_file() {
            return Ok(true);
        }
    }
    Ok(false)
}

fn load_policy_source(
    dir: &Path,
    cutoff: Month,
    log: &Logger,
) -> AppResult<PolicySource> {
    let is_cache = detect_cache_layout(dir).input_path("read policy directory", dir)?;
    let source = if is_cache {
        log.debug(format!(
            "policies: snapshot cache {} at cutoff {cutoff}",
            dir.display()
        ));
        PolicySource::from_cache(dir, cutoff).input_path("load snapshot cache", dir)?
    } else {
        log.debug(format!("policies: robots.txt directory {}", dir.display()));
        PolicySource::from_dir(dir).input_path("load policy directory", dir)?
    };
    if source.is_empty() {
        log.warn(format!(
            "policy source {} is empty; every document will be compliant",
            dir.display()
        ));
    }
    Ok(source)
}

/// One `verdicts.ndjson` line: the document id plus its verdict fields.
#[derive(Serialize)]
struct VerdictLine<'a> {
    id: &'a str,
    #[serde(flatten)]
    verdict: &'a Verdict,
}

fn cmd_filter(args: FilterArgs, settings: &Settings, log: &Logger) -> AppResult<()> {
    let cutoff = parse_cutoff(&args.cutoff).map_err(|e| AppError::usage(format!("--cutoff: {e}")))?;
    let policies_dir = args
        .policies
        .or(settings.cache_dir.clone())
        .ok_or_else(|| {
            AppError::usage(
                "no policy source: pass --policies, set CGATE_CACHE_DIR, \
                 or set cache_dir in the config file",
            )
        })?;
    let source = load_policy_source(&absolutize(policies_dir), cutoff, log)?;
    let blocklist = load_blocklist(args.blocklist.as_deref(), settings, log)?;
    let jobs = args
        .jobs
        .map(|n| n as usize)
        .or(settings.jobs)
        .unwrap_or(0);
    let opts = PartitionOptions {
        mode: match args.mode {
            ModeChoice::Path => PartitionMode::PathLevel,
            ModeChoice::Domain => PartitionMode::DomainLevel,
        },
        decide: DecideOptions {
            unreachable_disallows: !args.unreachable_allows,
        },
        jobs,
    };

    let mut reader = open_corpus(&args.corpus, TokenizerConfig::counting())?;
    create_out_dir(&args.out)?;
    let compliant_path = args.out.join("compliant.ndjson");
    let noncompliant_path = args.out.join("noncompliant.ndjson");
    let mut compliant = LineWriter::create(&compliant_path)?;
    let mut noncompliant = LineWriter::create(&noncompliant_path)?;
    let mut verdicts = match args.verdicts {
        true => Some(LineWriter::create(&args.out.join("verdicts.ndjson"))?),
        false => None,
    };

    let result = corpus::partition_stream(&mut reader, &source, &blocklist, opts, |doc, verdict| {
        if let Some(w) = verdicts.as_mut() {
            let line = serde_json::to_string(&VerdictLine {
                id: &doc.id,
                verdict,
            })
            .expect("verdict serializes");
            w.line(line.as_bytes())?;
        }
        if verdict.is_compliant() {
            compliant.line(doc.raw_line.as_bytes())
        } else {
            noncompliant.line(doc.raw_line.as_bytes())
        }
    })
    .input_path("partition corpus", &args.corpus)?;

    compliant.finish()?;
    noncompliant.finish()?;
    if let Some(w) = verdicts {
        w.finish()?;
    }

    let summary = &result.summary;
    let summary_json =
        serde_json::to_string_pretty(summary).expect("summary serializes") + "\n";
    write_file(&args.out.join("summary.json"), summary_json.as_bytes())?;

    if summary.skipped_invalid_lines > 0 {
        log.warn(format!(
            "{} invalid corpus lines skipped",
            summary.skipped_invalid_lines
        ));
    }
    log.info(format!(
        "{} docs: {} compliant, {} non-compliant ({:.2}% token loss) → {}",
        summary.total_docs,
        summary.total_docs - summary.removed_docs,
        summary.removed_docs,
        summary.token_loss_fraction * 100.0,
        args.out.display()
    ));
    Ok(())
}

/// Buffered NDJSON writer that appends the newline itself.
struct LineWriter {
    path: PathBuf,
    inner: std::io::BufWriter<fs::File>,
}

impl LineWriter {
    fn create(path: &Path) -> AppResult<Self> {
        let file = fs::File::create(path).input_path("create", path)?;
        Ok(LineWriter {
            path: path.to_path_buf(),
            inner: std::io::BufWriter::new(file),
        })
    }

    fn line(&mut self, bytes: &[u8]) -> std::io::Result<()> {
        self.inner.write_all(bytes)?;
        self.inner.write_all(b"\n")
    }

    fn finish(mut self) -> AppResult<()> {
        self.inner
            .flush()
            .input_path("write", &self.path.clone())
    }
}

// ---------------------------------------------------------------------------
// exclude
// ---------------------------------------------------------------------------

fn cmd_exclude(args: ExcludeArgs, log: &Logger) -> AppResult<()> {
    let domains = corpus::load_domain_list(&args.domains)
        .input_path("read domain list", &args.domains)?;
    let mut reader = open_corpus(&args.corpus, TokenizerConfig::counting())?;
    create_out_dir(&args.out)?;
    let mut kept = LineWriter::create(&args.out.join("kept.ndjson"))?;
    let mut excluded = LineWriter::create(&args.out.join("excluded.ndjson"))?;

    let result = corpus::exclude_domains(&mut reader, &domains, |doc, verdict| {
        if verdict.is_compliant() {
            kept.line(doc.raw_line.as_bytes())
        } else {
            excluded.line(doc.raw_line.as_bytes())
        }
    })
    .input_path("read corpus", &args.corpus)?;

    kept.finish()?;
    excluded.finish()?;

    let summary = &result.summary;
    let summary_json =
        serde_json::to_string_pretty(summary).expect("summary serializes") + "\n";
    write_file(&args.out.join("summary.json"), summary_json.as_bytes())?;

    log.info(format!(
        "{} docs: {} kept, {} excluded ({:.2}% token loss) → {}",
        summary.total_docs,
        summary.total_docs - summary.removed_docs,
        summary.removed_docs,
        summary.token_loss_fraction * 100.0,
        args.out.display()
    ));
    Ok(())
}

// ---------------------------------------------------------------------------
// stats
// ---------------------------------------------------------------------------

fn cmd_stats(args: StatsArgs) -> AppResult<()> {
    let summary_path = if args.partition.is_dir() {
        args.partition.join("summary.json")
    } else {
        args.partition.clone()
    };
    let text = fs::read_to_string(&summary_path).input_path("read summary", &summary_path)?;
    let summary: corpus::PartitionSummary = serde_json::from_str(&text)
        .input_path("parse summary", &summary_path)?;
    let report = corpus::corpus_stats(&summary, args.top_k);
    write_file_or_stdout(args.out.as_deref(), report.to_csv().as_bytes())
}

// ---------------------------------------------------------------------------
// overlap
// ---------------------------------------------------------------------------

fn parse_target_specs(specs: &[String]) -> AppResult<Vec<(String, PathBuf)>> {
    let mut out: Vec<(String, PathBuf)> = Vec::new();
    let mut seen = BTreeSet::new();
    for spec in specs {
        let Some((name, path)) = spec.split_once('=') else {
            return Err(AppError::usage(format!(
                "--targets entry {spec:?} is not name=path"
            )));
        };
        let name = name.trim();
        if name.is_empty() {
            return Err(AppError::usage(format!(
                "--targets entry {spec:?} has an empty name"
            )));
        }
        if !seen.insert(name.to_string()) {
            return Err(AppError::usage(format!(
                "--targets names {name:?} twice"
            )));
        }
        out.push((name.to_string(), PathBuf::from(path.trim())));
    }
    Ok(out)
}

fn cmd_overlap(args: OverlapArgs, settings: &Settings, log: &Logger) -> AppResult<()> {
    if args.n == 0 {
        return Err(AppError::usage("--n must be at least 1"));
    }
    let targets = parse_target_specs(&args.targets)?;
    let tokenizer = args
        .tokenizer
        .or(settings.tokenizer)
        .unwrap_or(TokenizerChoice::Matching)
        .config();

    let mut builder = NgramIndex::builder(args.n, tokenizer);
    if args.verify {
        builder = builder.with_audit();
    }
    for (name, path) in &targets {
        let mut reader = open_corpus(path, tokenizer)?;
        builder
            .add_target(name, &mut reader)
            .map_err(AppError::input)?;
    }
    let index = builder.build();
    for (name, stats) in index.stats() {
        log.debug(format!(
            "target {name}: {} docs indexed, {} below window length",
            stats.docs, stats.sub_n_docs
        ));
    }
    log.info(format!(
        "indexed {} targets, {} distinct {}-token windows",
        index.target_names().len(),
        index.distinct_windows(),
        index.n()
    ));

    let mut reader = open_corpus(&args.corpus, tokenizer)?;
    let report = cgate_core::overlap::scan(
        &mut reader,
        &index,
        &tokenizer,
        ScanOptions {
            samples: args.samples,
            verify: args.verify,
        },
    )
    .map_err(AppError::input)?;

    if report.collisions_rejected > 0 {
        log.warn(format!(
            "{} hash hits rejected by window verification",
            report.collisions_rejected
        ));
    }

    if let Some(json_path) = &args.json {
        let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
        write_file(json_path, json.as_bytes())?;
    }
    write_file_or_stdout(args.out.as_deref(), report.to_csv().as_bytes())
}

// ---------------------------------------------------------------------------
// memorize-score
// ---------------------------------------------------------------------------

fn cmd_memorize_score(args: MemorizeScoreArgs, settings: &Settings, log: &Logger) -> AppResult<()> {
    if args.max_n == 0 {
        return Err(AppError::usage("--max-n must be at least 1"));
    }
    let (pairs, skipped) =
        metrics::load_pairs(&args.pairs).input_path("read pairs", &args.pairs)?;
    if skipped > 0 {
        log.warn(format!("{skipped} invalid pair lines skipped"));
    }
    if pairs.is_empty() {
        return Err(AppError::input(anyhow!(
            "{} contains no valid pairs",
            args.pairs.display()
        )));
    }
    let tokenizer = args
        .tokenizer
        .or(settings.tokenizer)
        .unwrap_or(TokenizerChoice::Matching)
        .config();
    let report = metrics::memorization_report(&pairs, &tokenizer, args.max_n);
    log.info(format!(
        "{} pairs: mean LCCS {:.2} tokens, mean BLEU {:.4}",
        report.overall.pairs, report.overall.mean_lccs, report.overall.mean_bleu
    ));
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    write_file_or_stdout(args.out.as_deref(), json.as_bytes())
}

// ---------------------------------------------------------------------------
// score-mcq
// ---------------------------------------------------------------------------

fn cmd_score_mcq(args: ScoreMcqArgs, log: &Logger) -> AppResult<()> {
    let (items, skipped) =
        metrics::load_benchmark(&args.items).input_path("read benchmark", &args.items)?;
    if skipped > 0 {
        log.warn(format!("{skipped} invalid benchmark lines skipped"));
    }
    if items.is_empty() {
        return Err(AppError::input(anyhow!(
            "{} contains no valid items",
            args.items.display()
        )));
    }
    let predictions =
        metrics::load_predictions(&args.preds).input_path("read predictions", &args.preds)?;
    let score = metrics::score_mcq(&items, &predictions);
    log.info(format!(
        "{}/{} correct ({:.1}%), {} missing, {} invalid labels",
        score.correct, score.total, score.accuracy_pct, score.missing, score.invalid_label
    ));
    let json = serde_json::to_string_pretty(&score).expect("score serializes") + "\n";
    write_file_or_stdout(args.out.as_deref(), json.as_bytes())
}

// ---------------------------------------------------------------------------
// dcg
// ---------------------------------------------------------------------------

fn cmd_dcg(args: DcgArgs, log: &Logger) -> AppResult<()> {
    if let Some(noise) = args.noise {
        if !(noise >= 0.0) {
            return Err(AppError::usage("--noise must be non-negative"));
        }
    }
    let baseline = report::load_result_set(&args.baseline).map_err(AppError::input)?;
    let treatment = report::load_result_set(&args.treatment).map_err(AppError::input)?;
    let gap = report::compute_dcg(&baseline, &treatment, args.noise).map_err(AppError::input)?;

    for name in &gap.missing_in_baseline {
        log.warn(format!("benchmark {name} missing from baseline; not differenced"));
    }
    for name in &gap.missing_in_treatment {
        log.warn(format!("benchmark {name} missing from treatment; not differenced"));
    }
    log.info(format!(
        "{} shared benchmarks: average gap {:+.2} ({} {:.2} vs {} {:.2})",
        gap.per_benchmark.len(),
        gap.average_gap,
        gap.treatment_label,
        gap.treatment_avg,
        gap.baseline_label,
        gap.baseline_avg,
    ));

    match &args.out {
        Some(dir) => {
            create_out_dir(dir)?;
            let path = report::emit_report(&gap, dir, args.format.format())
                .map_err(AppError::input)?;
            log.info(format!("wrote {}", path.display()));
            Ok(())
        }
        None => {
            let rendered = match args.format.format() {
                ReportFormat::Csv => report::gap_csv(&gap),
                ReportFormat::Json => report::gap_json(&gap),
                ReportFormat::Plot => report::gap_plot_data(&gap),
            };
            write_file_or_stdout(None, rendered.as_bytes())
        }
    }
}

// ---------------------------------------------------------------------------
// Unit tests (process-level behavior is covered by the integration suite)
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_accepts_date_and_month() {
        assert_eq!(parse_cutoff("2025-01-31").unwrap(), Month::new(2025, 1).unwrap());
        assert_eq!(parse_cutoff("2025-01").unwrap(), Month::new(2025, 1).unwrap());
        assert_eq!(parse_cutoff("2024-02-29").unwrap(), Month::new(2024, 2).unwrap());
        assert!(parse_cutoff("2023-02-29").is_err());
        assert!(parse_cutoff("2025-13-01").is_err());
        assert!(parse_cutoff("2025/01/31").is_err());
        assert!(parse_cutoff("2025-01-00").is_err());
    }

    #[test]
    fn target_specs_parse_and_reject_duplicates() {
        let parsed = parse_target_specs(&[
            "nyt=/data/a.ndjson".to_string(),
            "med=/data/b.ndjson".to_string(),
        ])
        .unwrap();
        assert_eq!(parsed[0].0, "nyt");
        assert_eq!(parsed[1].1, PathBuf::from("/data/b.ndjson"));

        assert!(parse_target_specs(&["noequals".to_string()]).is_err());
        assert!(parse_target_specs(&["=path".to_string()]).is_err());
        assert!(
            parse_target_specs(&["a=x".to_string(), "a=y".to_string()]).is_err()
        );
    }

    #[test]
    fn config_file_parses_and_rejects_unknown_keys() {
        let mut s = Settings::default();
        s.apply_file(
            "# comment\ncache_dir = /tmp/cache\njobs = 4\nrps = 2.5\nlog_level = debug\n",
            Path::new("test.conf"),
        )
        .unwrap();
        assert_eq!(s.cache_dir, Some(PathBuf::from("/tmp/cache")));
        assert_eq!(s.jobs, Some(4));
        assert_eq!(s.rps, Some(2.5));
        assert_eq!(s.log_level, Some(LogLevel::Debug));

        let mut s = Settings::default();
        assert!(s.apply_file("nonsense = 1\n", Path::new("t")).is_err());
        let mut s = Settings::default();
        assert!(s.apply_file("jobs = 0\n", Path::new("t")).is_err());
        let mut s = Settings::default();
        assert!(s.apply_file("just a line\n", Path::new("t")).is_err());
    }

    #[test]
    fn cli_parses_every_subcommand() {
        use clap::CommandFactory;
        Cli::command().debug_assert();

        let cli = Cli::try_parse_from([
            "cgate",
            "parse-robots",
            "--file",
            "r.txt",
            "--agent",
            "GPTBot",
            "--path",
            "/x",
        ])
        .unwrap();
        assert!(matches!(cli.command, Command::ParseRobots(_)));

        let cli = Cli::try_parse_from([
            "cgate", "overlap", "--corpus", "c.ndjson", "--targets", "a=x,b=y", "--n", "50",
        ])
        .unwrap();
        match cli.command {
            Command::Overlap(args) => assert_eq!(args.targets, vec!["a=x", "b=y"]),
            other => panic!("wrong command: {other:?}"),
        }

        assert!(Cli::try_parse_from(["cgate", "does-not-exist"]).is_err());
    }
}
