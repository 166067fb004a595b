//! Archived robots.txt snapshots and per-domain block timelines.
//!
//! For each (domain, month) we retrieve at most one archived robots.txt
//! capture — the one closest to mid-month — through a web-archive endpoint
//! (snapshot index + capture download, the CDX wire format). Everything is
//! cached on disk under `<cache>/<domain>/<YYYY-MM>.robots.txt` with a
//! per-domain `index.json`, so a repeated run answers entirely from cache and
//! performs zero archive requests.
//!
//! From cached snapshots, [`build_timeline`] derives which blocklisted agents
//! each month's policy blocked, and [`timeline_report`] aggregates domains
//! into monthly blocking counts plus first-block events.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::blocklist::Blocklist;
use crate::month::Month;
use crate::rep;

/// Classified outcome of a monthly snapshot lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotStatus {
    /// A robots.txt body was archived and stored.
    Ok,
    /// The capture closest to mid-month was a 4xx.
    ClientError,
    /// The capture closest to mid-month was a 5xx.
    ServerError,
    /// The capture exists but is not robots.txt (redirect, HTML page, ...).
    Unreadable,
    /// The archive holds no capture for this month.
    NotArchived,
}

/// One cached (domain, month) snapshot outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    pub domain: String,
    pub month: Month,
    /// When this record was created (ISO-8601 UTC).
    pub fetched_at: String,
    pub status: SnapshotStatus,
    /// Original HTTP status of the selected capture, when one existed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub http_status: Option<u16>,
    /// `sha256:<hex>` of the stored body.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body_digest: Option<String>,
    /// Body location relative to the cache root.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body_path: Option<String>,
}

/// On-disk snapshot cache.
///
/// Layout: `<root>/<domain>/<YYYY-MM>.robots.txt` bodies plus
/// `<root>/<domain>/index.json` (the domain's [`SnapshotRecord`]s sorted by
/// month). All writes go to a temporary file in the target directory followed
/// by an atomic rename, so readers never observe partial content.
pub struct SnapshotCache {
    root: PathBuf,
}

impl SnapshotCache {
    pub fn open(root: &Path) -> Self {
        SnapshotCache {
            root: root.to_path_buf(),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Domains present in the cache, sorted.
    pub fn domains(&self) -> io::Result<Vec<String>> {
        let mut out = Vec::new();
        let entries = match std::fs::read_dir(&self.root) {
            Ok(e) => e,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(out),
            Err(e) => return Err(e),
        };
        for entry in entries {
            let entry = entry?;
            if entry.file_type()?.is_dir() {
                if let Some(name) = entry.file_name().to_str() {
                    out.push(name.to_string());
                }
            }
        }
        out.sort();
        Ok(out)
    }

    /// The domain's records, sorted by month; empty if never fetched.
    pub fn read_index(&self, domain: &str) -> io::Result<Vec<SnapshotRecord>> {
        let path = self.root.join(domain).join("index.json");
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e),
        };
        let mut records: Vec<SnapshotRecord> = serde_json::from_slice(&bytes)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
        records.sort_by_key(|r| r.month);
        Ok(records)
    }

    pub fn write_index(&self, domain: &str, records: &[SnapshotRecord]) -> io::Result<()> {
        let mut sorted: Vec<&SnapshotRecord> = records.iter().collect();
        sorted.sort_by_key(|r| r.month);
        let json = serde_json::to_vec_pretty(&sorted).expect("records serialize");
        self.atomic_write(&self.root.join(domain).join("index.json"), &json)
    }

    /// Store a body and return its cache-relative path.
    pub fn write_body(&self, domain: &str, month: Month, body: &[u8]) -> io::Result<String> {
        let rel = format!("{domain}/{month}.robots.txt");
        self.atomic_write(&self.root.join(&rel), body)?;
        Ok(rel)
    }

    pub fn read_body(&self, record: &SnapshotRecord) -> io::Result<Vec<u8>> {
        let rel = record.body_path.as_deref().ok_or_else(|| {
            io::Error::new(
                io::ErrorKind::InvalidInput,
                format!("{} {} has no stored body", record.domain, record.month),
            )
        })?;
        std::fs::read(self.root.join(rel))
    }

    fn atomic_write(&self, path: &Path, bytes: &[u8]) -> io::Result<()> {
        use std::sync::atomic::{AtomicU64, Ordering};
        static COUNTER: AtomicU64 = AtomicU64::new(0);
        let dir = path.parent().expect("cache paths have parents");
        std::fs::create_dir_all(dir)?;
        let tmp = dir.join(format!(
            ".tmp.{}.{}",
            std::process::id(),
            COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        std::fs::write(&tmp, bytes)?;
        std::fs::rename(&tmp, path).inspect_err(|_| {
            let _ = std::fs::remove_file(&tmp);
        })
    }
}

/// `sha256:<hex>` digest used for body integrity.
pub fn body_digest(bytes: &[u8]) -> String {
    let d = Sha256::digest(bytes);
    let hex: String = d.iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}

// ---------------------------------------------------------------------------
// Archive endpoint abstraction
// ---------------------------------------------------------------------------

/// One capture row from a snapshot index query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Capture {
    /// `YYYYMMDDhhmmss`.
    pub timestamp: String,
    /// Original URL as archived.
    pub original: String,
    /// Original HTTP status (0 when the index did not report one).
    pub status: u16,
}

/// A downloaded capture body.
#[derive(Debug, Clone)]
pub struct FetchedBody {
    pub status: u16,
    pub bytes: Vec<u8>,
}

#[derive(Debug, thiserror::Error)]
pub enum ArchiveError {
    #[error("network error: {0}")]
    Network(String),
    #[error("archive rate limit persisted after retries")]
    RateLimited,
    #[error("archive server error {0} persisted after retries")]
    Server(u16),
    #[error("malformed archive response: {0}")]
    Malformed(String),
}

/// A snapshot archive: an index that lists captures of a URL and a way to
/// download one capture. Implemented over HTTP for real archives and by
/// in-process fixtures in tests.
pub trait ArchiveEndpoint {
    /// All captures of `url` within `month`, in timestamp order.
    fn list_captures(&self, url: &str, month: Month) -> Result<Vec<Capture>, ArchiveError>;

    /// Download one capture's original bytes.
    fn fetch_capture(&self, capture: &Capture) -> Result<FetchedBody, ArchiveError>;
}

/// Parse a CDX-style JSON index payload: an array of rows, the first row
/// naming columns (`timestamp`, `original`, `statuscode`, ...). Returns
/// captures with malformed rows dropped.
pub fn parse_cdx(bytes: &[u8]) -> Result<Vec<Capture>, ArchiveError> {
    let text = String::from_utf8_lossy(bytes);
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| ArchiveError::Malformed(format!("index payload is not JSON: {e}")))?;
    let rows = value
        .as_array()
        .ok_or_else(|| ArchiveError::Malformed("index payload is not an array".into()))?;
    if rows.is_empty() {
        return Ok(Vec::new());
    }
    let header: Vec<String> = rows[0]
        .as_array()
        .ok_or_else(|| ArchiveError::Malformed("index header is not an array".into()))?
        .iter()
        .map(|v| v.as_str().unwrap_or_default().to_string())
        .collect();
    let col = |name: &str| header.iter().position(|h| h == name);
    let (ts_col, orig_col) = match (col("timestamp"), col("original")) {
        (Some(t), Some(o)) => (t, o),
        _ => {
            return Err(ArchiveError::Malformed(
                "index header lacks timestamp/original columns".into(),
            ))
        }
    };
    let status_col = col("statuscode");

    let mut captures = Vec::new();
    for row in &rows[1..] {
        let Some(cells) = row.as_array() else { continue };
        let ts = cells.get(ts_col).and_then(|v| v.as_str()).unwrap_or("");
        let orig = cells.get(orig_col).and_then(|v| v.as_str()).unwrap_or("");
        if ts.len() != 14 || !ts.bytes().all(|b| b.is_ascii_digit()) || orig.is_empty() {
            continue;
        }
        let status = status_col
            .and_then(|c| cells.get(c))
            .and_then(|v| v.as_str())
            .and_then(|s| s.parse::<u16>().ok())
            .unwrap_or(0);
        captures.push(Capture {
            timestamp: ts.to_string(),
            original: orig.to_string(),
            status,
        });
    }
    captures.sort_by(|a, b| a.timestamp.cmp(&b.timestamp));
    Ok(captures)
}

/// Choose the capture closest to the month's midpoint (ties: the earlier one).
pub fn pick_capture<'a>(captures: &'a [Capture], month: Month) -> Option<&'a Capture> {
    let mid: u64 = month.midpoint_stamp().parse().expect("stamp is numeric");
    captures
        .iter()
        .filter(|c| c.timestamp.starts_with(&format!("{:04}{:02}", month.year(), month.month())))
        .min_by_key(|c| {
            let ts: u64 = c.timestamp.parse().expect("validated numeric");
            (ts.abs_diff(mid), ts)
        })
}

// ---------------------------------------------------------------------------
// HTTP archive client
// ---------------------------------------------------------------------------

/// Endpoint configuration. The defaults point at the public Internet Archive
/// CDX API; tests point both URLs at a local fixture server.
#[derive(Debug, Clone)]
pub struct ArchiveConfig {
    /// Snapshot index endpoint (CDX query API).
    pub index_url: String,
    /// Capture download root; bodies come from `<fetch_url>/<ts>id_/<orig>`.
    pub fetch_url: String,
    /// Politeness ceiling in requests per second; `0` disables waiting.
    pub rps: f64,
    /// Retries for 429/5xx/transport failures, with exponential backoff.
    pub max_retries: u32,
    pub backoff_base_ms: u64,
    pub timeout_secs: u64,
}

impl Default for ArchiveConfig {
    fn default() -> Self {
        ArchiveConfig {
            index_url: "https://web.archive.org/cdx/search/cdx".into(),
            fetch_url: "https://web.archive.org/web".into(),
            rps: 1.0,
            max_retries: 5,
            backoff_base_ms: 500,
            timeout_secs: 30,
        }
    }
}

impl ArchiveConfig {
    /// Point both endpoints at one base URL (`<base>/cdx`, `<base>/web`),
    /// the shape the test fixture server exposes.
    pub fn with_base(base: &str) -> Self {
        ArchiveConfig {
            index_url: format!("{}/cdx", base.trim_end_matches('/')),
            fetch_url: format!("{}/web", base.trim_end_matches('/')),
            ..ArchiveConfig::default()
        }
    }
}

#[cfg(feature = "net")]
pub use net::HttpArchive;

#[cfg(feature = "net")]
mod net {
    use super::*;
    use std::sync::Mutex;
    use std::time::{Duration, Instant};

    /// HTTP implementation of [`ArchiveEndpoint`] with request-rate
    /// politeness and bounded exponential backoff.
    pub struct HttpArchive {
        config: ArchiveConfig,
        agent: ureq::Agent,
        last_request: Mutex<Option<Instant>>,
    }

    /// Bodies larger than this are truncated; robots.txt files are small and
    /// anything bigger is not one.
    const MAX_BODY: u64 = 2 * 1024 * 1024;

    enum Attempt {
        Done(FetchedBody),
        Retry(ArchiveError),
    }

    impl HttpArchive {
        pub fn new(config: ArchiveConfig) -> Self {
            let agent = ureq::AgentBuilder::new()
                .timeout(Duration::from_secs(config.timeout_secs.max(1)))
                .build();
            HttpArchive {
                config,
                agent,
                last_request: Mutex::new(None),
            }
        }

        fn be_polite(&self) {
            if self.config.rps <= 0.0 {
                return;
            }
            let min_gap = Duration::from_secs_f64(1.0 / self.config.rps);
            let mut last = self.last_request.lock().expect("limiter lock");
            if let Some(prev) = *last {
                let elapsed = prev.elapsed();
                if elapsed < min_gap {
                    std::thread::sleep(min_gap - elapsed);
                }
            }
            *last = Some(Instant::now());
        }

        fn get(&self, url: &str, query: &[(&str, &str)]) -> Attempt {
            self.be_polite();
            let mut req = self.agent.get(url);
            for (k, v) in query {
                req = req.query(k, v);
            }
            let (status, response) = match req.call() {
                Ok(resp) => (resp.status(), resp),
                Err(ureq::Error::Status(code, resp)) => (code, resp),
                Err(ureq::Error::Transport(t)) => {
                    return Attempt::Retry(ArchiveError::Network(t.to_string()))
                }
            };
            if status == 429 {
                return Attempt::Retry(ArchiveError::RateLimited);
            }
            if (500..=599).contains(&status) {
                return Attempt::Retry(ArchiveError::Server(status));
            }
            let mut bytes = Vec::new();
            let mut reader = io::Read::take(response.into_reader(), MAX_BODY);
            if let Err(e) = io::Read::read_to_end(&mut reader, &mut bytes) {
                return Attempt::Retry(ArchiveError::Network(e.to_string()));
            }
            Attempt::Done(FetchedBody { status, bytes })
        }

        /// `get` with retries; backoff doubles per attempt.
        fn get_with_retry(
            &self,
            url: &str,
            query: &[(&str, &str)],
        ) -> Result<FetchedBody, ArchiveError> {
            let mut delay = Duration::from_millis(self.config.backoff_base_ms);
            let mut last_err = None;
            for attempt in 0..=self.config.max_retries {
                match self.get(url, query) {
                    Attempt::Done(body) => return Ok(body),
                    Attempt::Retry(err) => {
                        last_err = Some(err);
                        if attempt < self.config.max_retries {
                            std::thread::sleep(delay);
                            delay = delay.saturating_mul(2);
                        }
                    }
                }
            }
            Err(last_err.expect("at least one attempt"))
        }
    }

    impl ArchiveEndpoint for HttpArchive {
        fn list_captures(&self, url: &str, month: Month) -> Result<Vec<Capture>, ArchiveError> {
            let from = month.start_stamp();
            let to = month.end_stamp();
            let body = self.get_with_retry(
                &self.config.index_url,
                &[
                    ("url", url),
                    ("from", &from),
                    ("to", &to),
                    ("output", "json"),
                    ("fl", "timestamp,original,statuscode"),
                ],
            )?;
            match body.status {
                200 => parse_cdx(&body.bytes),
                404 => Ok(Vec::new()),
                other => Err(ArchiveError::Malformed(format!(
                    "index query returned status {other}"
                ))),
            }
        }

        fn fetch_capture(&self, capture: &Capture) -> Result<FetchedBody, ArchiveError> {
            // `id_` asks for the identical original body, no replay rewriting.
            let url = format!(
                "{}/{}id_/{}",
                self.config.fetch_url.trim_end_matches('/'),
                capture.timestamp,
                capture.original
            );
            self.get_with_retry(&url, &[])
        }
    }
}

// ---------------------------------------------------------------------------
// Fetching months into the cache
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FetchOptions {
    /// Never touch the network; months missing from the cache become errors.
    pub offline: bool,
}

impl Default for FetchOptions {
    fn default() -> Self {
        FetchOptions { offline: false }
    }
}

/// A month that could not be resolved this run (kept out of the index so a
/// later run retries it).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonthError {
    pub month: Month,
    pub error: String,
}

/// Outcome of fetching one domain's month range.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FetchReport {
    pub domain: String,
    pub records: Vec<SnapshotRecord>,
    pub errors: Vec<MonthError>,
    /// Months answered from the existing cache.
    pub cache_hits: u64,
    /// Months that required archive requests.
    pub fetched: u64,
    /// False when the archive has no capture in any requested month — the
    /// "never archived" signal, distinct from network failure.
    pub domain_archived: bool,
}

/// Ensure every month in `[from, to]` has a cached snapshot outcome for
/// `domain`, fetching what is missing through `endpoint`.
///
/// Cached months — including negative `NotArchived` outcomes — are never
/// re-fetched: a second identical run performs zero archive requests.
/// Network failures annotate the month and leave the cache untouched.
pub fn fetch_snapshots(
    endpoint: &dyn ArchiveEndpoint,
    cache: &SnapshotCache,
    domain: &str,
    from: Month,
    to: Month,
    opts: &FetchOptions,
) -> io::Result<FetchReport> {
    let mut by_month: BTreeMap<Month, SnapshotRecord> = cache
        .read_index(domain)?
        .into_iter()
        .map(|r| (r.month, r))
        .collect();

    let mut report = FetchReport {
        domain: domain.to_string(),
        records: Vec::new(),
        errors: Vec::new(),
        cache_hits: 0,
        fetched: 0,
        domain_archived: false,
    };
    let robots_url = format!("{domain}/robots.txt");
    let mut dirty = false;

    for month in from.range_to(to) {
        if by_month.contains_key(&month) {
            report.cache_hits += 1;
            continue;
        }
        if opts.offline {
            report.errors.push(MonthError {
                month,
                error: "offline mode and month not cached".into(),
            });
            continue;
        }
        match resolve_month(endpoint, cache, domain, &robots_url, month) {
            Ok(record) => {
                report.fetched += 1;
                by_month.insert(month, record);
                dirty = true;
            }
            Err(err) => {
                report.errors.push(MonthError {
                    month,
                    error: err.to_string(),
                });
            }
        }
    }

    if dirty {
        let all: Vec<SnapshotRecord> = by_month.values().cloned().collect();
        cache.write_index(domain, &all)?;
    }

    report.records = by_month
        .into_iter()
        .filter(|(m, _)| *m >= from && *m <= to)
        .map(|(_, r)| r)
        .collect();
    report.domain_archived = report
        .records
        .iter()
        .any(|r| r.status != SnapshotStatus::NotArchived);
    Ok(report)
}

fn resolve_month(
    endpoint: &dyn ArchiveEndpoint,
    cache: &SnapshotCache,
    domain: &str,
    robots_url: &str,
    month: Month,
) -> Result<SnapshotRecord, ArchiveError> {
    let captures = endpoint.list_captures(robots_url, month)?;
    let Some(capture) = pick_capture(&captures, month) else {
        return Ok(SnapshotRecord {
            domain: domain.to_string(),
            month,
            fetched_at: iso_utc_now(),
            status: SnapshotStatus::NotArchived,
            http_status: None,
            body_digest: None,
            body_path: None,
        });
    };

    let mut record = SnapshotRecord {
        domain: domain.to_string(),
        month,
        fetched_at: iso_utc_now(),
        status: SnapshotStatus::Unreadable,
        http_status: Some(capture.status),
        body_digest: None,
        body_path: None,
    };
    match capture.status {
        200 => {
            let body = endpoint.fetch_capture(capture)?;
            if body.status != 200 {
                record.status = match body.status {
                    400..=499 => SnapshotStatus::ClientError,
                    _ => SnapshotStatus::Unreadable,
                };
                record.http_status = Some(body.status);
            } else if looks_like_html(&body.bytes) {
                record.status = SnapshotStatus::Unreadable;
            } else {
                let rel = cache
                    .write_body(domain, month, &body.bytes)
                    .map_err(|e| ArchiveError::Network(format!("cache write: {e}")))?;
                record.status = SnapshotStatus::Ok;
                record.body_digest = Some(body_digest(&body.bytes));
                record.body_path = Some(rel);
            }
        }
        400..=499 => record.status = SnapshotStatus::ClientError,
        500..=599 => record.status = SnapshotStatus::ServerError,
        _ => record.status = SnapshotStatus::Unreadable,
    }
    Ok(record)
}

/// A capture that claims to be robots.txt but opens like an HTML document is
/// a parked page or consent wall, not a policy.
fn looks_like_html(bytes: &[u8]) -> bool {
    let head = String::from_utf8_lossy(&bytes[..bytes.len().min(256)]).to_lowercase();
    let head = head.trim_start();
    head.starts_with("<!doctype") || head.starts_with("<html")
}

// ---------------------------------------------------------------------------
// Timelines
// ---------------------------------------------------------------------------

/// Month-indexed blocking history for one domain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainTimeline {
    pub domain: String,
    /// Months with a readable policy → the blocklisted agents it blocked
    /// (possibly empty).
    pub entries: BTreeMap<Month, BTreeSet<String>>,
    /// Earliest month each agent appears blocked.
    pub first_block: BTreeMap<String, Month>,
    /// Months that contributed nothing, with the reason.
    pub diagnostics: Vec<String>,
}

/// Derive a domain's block timeline from its cached snapshot records.
///
/// Only records with a readable body contribute entries; missing, erroring,
/// or unreadable months are listed in `diagnostics` instead. `probe_path` is
/// the path queried against each month's policy (`/` for the domain-level
/// question).
pub fn build_timeline(
    cache: &SnapshotCache,
    records: &[SnapshotRecord],
    blocklist: &Blocklist,
    probe_path: &str,
) -> io::Result<DomainTimeline> {
    let mut timeline = DomainTimeline {
        domain: records
            .first()
            .map(|r| r.domain.clone())
            .unwrap_or_default(),
        entries: BTreeMap::new(),
        first_block: BTreeMap::new(),
        diagnostics: Vec::new(),
    };
    let mut sorted: Vec<&SnapshotRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.month);

    for record in sorted {
        match record.status {
            SnapshotStatus::Ok => {
                let body = cache.read_body(record)?;
                let policy = rep::parse_robots(&body, None);
                let blocked = rep::blocked_agents(&policy, blocklist.agents(), probe_path);
                for agent in &blocked {
                    timeline
                        .first_block
                        .entry(agent.clone())
                        .or_insert(record.month);
                }
                timeline.entries.insert(record.month, blocked);
            }
            SnapshotStatus::NotArchived => {
                timeline
                    .diagnostics
                    .push(format!("{}: not archived", record.month));
            }
            SnapshotStatus::ClientError => {
                timeline
                    .diagnostics
                    .push(format!("{}: capture was a client error", record.month));
            }
            SnapshotStatus::ServerError => {
                timeline
                    .diagnostics
                    .push(format!("{}: capture was a server error", record.month));
            }
            SnapshotStatus::Unreadable => {
                timeline
                    .diagnostics
                    .push(format!("{}: capture body unreadable", record.month));
            }
        }
    }
    Ok(timeline)
}

/// A (domain, agent) first-block event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FirstBlockRow {
    pub domain: String,
    pub agent: String,
    pub month: Month,
}

/// Aggregated view across domains: monthly blocking counts plus first-block
/// events, ready for CSV/plot rendering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimelineReport {
    /// Contiguous month span from earliest to latest entry.
    pub months: Vec<Month>,
    /// Domains blocking at least one blocklisted agent, per month.
    pub blocking_counts: BTreeMap<Month, u64>,
    /// Sorted by (month, domain, agent).
    pub first_blocks: Vec<FirstBlockRow>,
}

pub fn timeline_report(timelines: &[DomainTimeline]) -> TimelineReport {
    let mut lo: Option<Month> = None;
    let mut hi: Option<Month> = None;
    for t in timelines {
        for m in t.entries.keys() {
            lo = Some(lo.map_or(*m, |v| v.min(*m)));
            hi = Some(hi.map_or(*m, |v| v.max(*m)));
        }
    }
    let months: Vec<Month> = match (lo, hi) {
        (Some(lo), Some(hi)) => lo.range_to(hi).collect(),
        _ => Vec::new(),
    };

    let mut blocking_counts = BTreeMap::new();
    for month in &months {
        let count = timelines
            .iter()
            .filter(|t| t.entries.get(month).is_some_and(|set| !set.is_empty()))
            .count() as u64;
        blocking_counts.insert(*month, count);
    }

    let mut first_blocks: Vec<FirstBlockRow> = timelines
        .iter()
        .flat_map(|t| {
            t.first_block.iter().map(|(agent, month)| FirstBlockRow {
                domain: t.domain.clone(),
                agent: agent.clone(),
                month: *month,
            })
        })
        .collect();
    first_blocks.sort_by(|a, b| {
        (a.month, &a.domain, &a.agent).cmp(&(b.month, &b.domain, &b.agent))
    });

    TimelineReport {
        months,
        blocking_counts,
        first_blocks,
    }
}

impl TimelineReport {
    /// `month,domains_blocking` rows over the whole span.
    pub fn monthly_csv(&self) -> String {
        let mut out = String::from("month,domains_blocking\n");
        for month in &self.months {
            let count = self.blocking_counts.get(month).copied().unwrap_or(0);
            out.push_str(&format!("{month},{count}\n"));
        }
        out
    }

    /// `domain,agent,month` first-block event rows.
    pub fn first_blocks_csv(&self) -> String {
        let mut out = String::from("domain,agent,month\n");
        for row in &self.first_blocks {
            out.push_str(&format!(
                "{},{},{}\n",
                crate::corpus::csv_field(&row.domain),
                crate::corpus::csv_field(&row.agent),
                row.month
            ));
        }
        out
    }

    /// Tab-separated `month\tcount` pairs, convenient for plotting tools.
    pub fn plot_data(&self) -> String {
        let mut out = String::new();
        for month in &self.months {
            let count = self.blocking_counts.get(month).copied().unwrap_or(0);
            out.push_str(&format!("{month}\t{count}\n"));
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Time formatting
// ---------------------------------------------------------------------------

/// ISO-8601 UTC from a Unix timestamp (civil-from-days algorithm).
pub fn iso_from_unix(secs: i64) -> String {
    let days = secs.div_euclid(86_400);
    let rem = secs.rem_euclid(86_400);
    let (h, m, s) = (rem / 3600, (rem % 3600) / 60, rem % 60);

    let z = days + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z.rem_euclid(146_097);
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = doy - (153 * mp + 2) / 5 + 1;
    let mth = if mp < 10 { mp + 3 } else { mp - 9 };
    let y = if mth <= 2 { y + 1 } else { y };
    format!("{y:04}-{mth:02}-{d:02}T{h:02}:{m:02}:{s:02}Z")
}

fn iso_utc_now() -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs() as i64)
        .unwrap_or(0);
    iso_from_unix(secs)
}
