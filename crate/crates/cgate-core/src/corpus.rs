//! Corpus partitioning: split documents into compliant / non-compliant sets
//! against per-domain robots policies, with token-accurate accounting.
//!
//! A document is non-compliant when the policy of its registrable domain
//! blocks at least one blocklisted agent for the probed path — either the
//! document's own URL path (`PathLevel`) or `/` (`DomainLevel`, the coarse
//! "does this site opt out at all" question). Documents whose URL cannot be
//! parsed are conservatively non-compliant and tallied separately.
//!
//! Verdicts are computed per record with no cross-record state, so batches
//! can be scored on any number of worker threads and reduced in input order:
//! output is byte-identical no matter the parallelism.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use url::Url;

use crate::blocklist::Blocklist;
use crate::domain::{self, DomainError};
use crate::month::Month;
use crate::ndjson::{DocumentRecord, NdjsonReader};
use crate::rep::{self, DecideOptions, RobotsPolicy};
use crate::timeline::{SnapshotCache, SnapshotStatus};

/// Granularity of the robots probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionMode {
    /// Probe each document's own URL path.
    PathLevel,
    /// Probe `/` once per domain: a domain-wide opt-out removes everything.
    DomainLevel,
}

/// Per-domain robots policies with registrable-domain fallback.
pub struct PolicySource {
    by_host: HashMap<String, RobotsPolicy>,
    missing: RobotsPolicy,
}

impl PolicySource {
    pub fn new(by_host: HashMap<String, RobotsPolicy>) -> Self {
        PolicySource {
            by_host,
            missing: RobotsPolicy::missing(),
        }
    }

    /// Load a flat directory of robots.txt files. Each file is named after
    /// its host, with an optional `.robots.txt` or `.txt` suffix:
    /// `example.com.robots.txt`, `news.example.org.txt`, `example.net`.
    pub fn from_dir(dir: &Path) -> io::Result<Self> {
        let mut by_host = HashMap::new();
        let mut entries: Vec<_> = std::fs::read_dir(dir)?
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .map(|e| e.path())
            .filter(|p| p.is_file())
            .collect();
        entries.sort();
        for path in entries {
            let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
                continue;
            };
            if name.starts_with('.') {
                continue;
            }
            let host = name
                .strip_suffix(".robots.txt")
                .or_else(|| name.strip_suffix(".txt"))
                .unwrap_or(name)
                .to_lowercase();
            if host.is_empty() {
                continue;
            }
            let body = std::fs::read(&path)?;
            by_host.insert(host, rep::parse_robots(&body, None));
        }
        Ok(PolicySource::new(by_host))
    }

    /// Load the most recent snapshot at or before `cutoff` for every domain
    /// in a snapshot cache. Months the archive had no capture for are skipped;
    /// error statuses become the corresponding error policy.
    pub fn from_cache(cache_dir: &Path, cutoff: Month) -> io::Result<Self> {
        let cache = SnapshotCache::open(cache_dir);
        let mut by_host = HashMap::new();
        for domain in cache.domains()? {
            let records = cache.read_index(&domain)?;
            let latest = records
                .iter()
                .filter(|r| r.month <= cutoff && r.status != SnapshotStatus::NotArchived)
                .max_by_key(|r| r.month);
            let Some(record) = latest else { continue };
            let policy = match record.status {
                SnapshotStatus::Ok => rep::parse_robots(&cache.read_body(record)?, None),
                SnapshotStatus::ClientError => rep::parse_robots(&[], Some(404)),
                SnapshotStatus::ServerError => rep::parse_robots(&[], Some(500)),
                SnapshotStatus::Unreadable => RobotsPolicy::unreadable(),
                SnapshotStatus::NotArchived => unreachable!("filtered above"),
            };
            by_host.insert(domain, policy);
        }
        Ok(PolicySource::new(by_host))
    }

    /// Policy for a host: exact entry, else the host's registrable domain,
    /// else a missing-file (allow-everything) policy.
    pub fn lookup(&self, host: &str) -> &RobotsPolicy {
        if let Some(p) = self.by_host.get(host) {
            return p;
        }
        if let Ok(reg) = domain::registrable_domain(&format!("https://{host}/")) {
            if let Some(p) = self.by_host.get(&reg) {
                return p;
            }
        }
        &self.missing
    }

    pub fn len(&self) -> usize {
        self.by_host.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_host.is_empty()
    }
}

/// Why a document landed on the non-compliant side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict")]
pub enum Verdict {
    Compliant,
    /// At least one blocklisted agent is disallowed for the probed path.
    Blocked { agents: BTreeSet<String> },
    /// The URL did not parse (or has no host); removed conservatively.
    UnparseableUrl,
    /// The document's registrable domain is on an exclusion list.
    ExcludedDomain,
}

impl Verdict {
    pub fn is_compliant(&self) -> bool {
        matches!(self, Verdict::Compliant)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainDiff {
    pub docs_removed: u64,
    pub tokens_removed: u64,
}

/// Aggregate outcome of a partition or exclusion pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSummary {
    pub mode: String,
    pub total_docs: u64,
    pub total_tokens: u64,
    pub removed_docs: u64,
    pub removed_tokens: u64,
    /// `removed_tokens / total_tokens`, computed on exact integer counts.
    pub token_loss_fraction: f64,
    pub unparseable_url_docs: u64,
    pub skipped_invalid_lines: u64,
    /// Removal accounting per registrable domain (only domains that lost at
    /// least one document appear).
    pub per_domain: BTreeMap<String, DomainDiff>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionResult {
    pub summary: PartitionSummary,
    /// Document ids in input order.
    pub compliant_ids: Vec<String>,
    pub noncompliant_ids: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct PartitionOptions {
    pub mode: PartitionMode,
    pub decide: DecideOptions,
    /// Worker threads for verdict scoring; 0 uses the process default.
    pub jobs: usize,
}

impl Default for PartitionOptions {
    fn default() -> Self {
        PartitionOptions {
            mode: PartitionMode::PathLevel,
            decide: DecideOptions::default(),
            jobs: 0,
        }
    }
}

const BATCH: usize = 4096;

fn verdict_for(
    doc: &DocumentRecord,
    source: &PolicySource,
    blocklist: &Blocklist,
    opts: &PartitionOptions,
) -> (Option<String>, Verdict) {
    let url = match Url::parse(&doc.url) {
        Ok(u) => u,
        Err(_) => return (None, Verdict::UnparseableUrl),
    };
    let host = match crate::domain::host_of(&doc.url) {
        Ok(h) => h,
        Err(_) => return (None, Verdict::UnparseableUrl),
    };
    let reg = domain::registrable_domain(&doc.url).unwrap_or_else(|_| host.clone());
    let policy = source.lookup(&host);
    let probe_path = match opts.mode {
        PartitionMode::PathLevel => domain::match_path(&url),
        PartitionMode::DomainLevel => "/".to_string(),
    };
    let blocked = rep::blocked_agents_with(
        policy,
        blocklist.agents(),
        &probe_path,
        opts.decide,
    );
    if blocked.is_empty() {
        (Some(reg), Verdict::Compliant)
    } else {
        (Some(reg), Verdict::Blocked { agents: blocked })
    }
}

/// Partition a corpus stream. `sink` observes every record in input order
/// with its verdict (e.g. to write the two output files); the returned result
/// carries the summary and id lists.
pub fn partition_stream<F>(
    reader: &mut NdjsonReader,
    source: &PolicySource,
    blocklist: &Blocklist,
    opts: PartitionOptions,
    mut sink: F,
) -> io::Result<PartitionResult>
where
    F: FnMut(&DocumentRecord, &Verdict) -> io::Result<()>,
{
    let pool = build_pool(opts.jobs)?;
    let mut acc = Accumulator::new(match opts.mode {
        PartitionMode::PathLevel => "path_level",
        PartitionMode::DomainLevel => "domain_level",
    });

    loop {
        let mut batch = Vec::with_capacity(BATCH);
        while batch.len() < BATCH {
            match reader.next_record()? {
                Some(doc) => batch.push(doc),
                None => break,
            }
        }
        if batch.is_empty() {
            break;
        }
        // Index-keyed parallel scoring, sequential ordered reduction: the
        // result cannot depend on thread count or scheduling.
        let verdicts: Vec<(Option<String>, Verdict)> = match &pool {
            Some(pool) => pool.install(|| {
                batch
                    .par_iter()
                    .map(|doc| verdict_for(doc, source, blocklist, &opts))
                    .collect()
            }),
            None => batch
                .par_iter()
                .map(|doc| verdict_for(doc, source, blocklist, &opts))
                .collect(),
        };
        for (doc, (reg, verdict)) in batch.iter().zip(verdicts) {
            acc.add(doc, reg, &verdict);
            sink(doc, &verdict)?;
        }
    }

    Ok(acc.finish(reader.stats().skipped_invalid))
}

/// Remove every document whose registrable domain appears in `domains`.
/// Same accounting as [`partition_stream`]; removed documents get
/// [`Verdict::ExcludedDomain`]. Documents with unparseable URLs cannot match
/// a listed domain; they stay compliant but are tallied.
pub fn exclude_domains<F>(
    reader: &mut NdjsonReader,
    domains: &BTreeSet<String>,
    mut sink: F,
) -> io::Result<PartitionResult>
where
    F: FnMut(&DocumentRecord, &Verdict) -> io::Result<()>,
{
    let mut acc = Accumulator::new("domain_exclusion");
    while let Some(doc) = reader.next_record()? {
        let (reg, verdict) = match domain::registrable_domain(&doc.url) {
            Ok(reg) => {
                if domains.contains(&reg) {
                    (Some(reg), Verdict::ExcludedDomain)
                } else {
                    (Some(reg), Verdict::Compliant)
                }
            }
            Err(DomainError::UnparseableUrl(_)) | Err(DomainError::NoHost(_)) => {
                acc.unparseable_kept += 1;
                (None, Verdict::Compliant)
            }
        };
        acc.add(&doc, reg, &verdict);
        sink(&doc, &verdict)?;
    }
    Ok(acc.finish(reader.stats().skipped_invalid))
}

/// Load a domain list file: one registrable domain per line, `#` comments.
pub fn load_domain_list(path: &Path) -> io::Result<BTreeSet<String>> {
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .map(|l| match l.find('#') {
            Some(pos) => &l[..pos],
            None => l,
        })
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_lowercase)
        .collect())
}

fn build_pool(jobs: usize) -> io::Result<Option<rayon::ThreadPool>> {
    if jobs == 0 {
        return Ok(None);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map(Some)
        .map_err(|e| io::Error::other(e.to_string()))
}

struct Accumulator {
    mode: &'static str,
    total_docs: u64,
    total_tokens: u64,
    removed_docs: u64,
    removed_tokens: u64,
    unparseable: u64,
    unparseable_kept: u64,
    per_domain: BTreeMap<String, DomainDiff>,
    compliant_ids: Vec<String>,
    noncompliant_ids: Vec<String>,
}

impl Accumulator {
    fn new(mode: &'static str) -> Self {
        Accumulator {
            mode,
            total_docs: 0,
            total_tokens: 0,
            removed_docs: 0,
            removed_tokens: 0,
            unparseable: 0,
            unparseable_kept: 0,
            per_domain: BTreeMap::new(),
            compliant_ids: Vec::new(),
            noncompliant_ids: Vec::new(),
        }
    }

    fn add(&mut self, doc: &DocumentRecord, reg: Option<String>, verdict: &Verdict) {
        self.total_docs += 1;
        self.total_tokens += doc.token_count;
        if verdict.is_compliant() {
            self.compliant_ids.push(doc.id.clone());
            return;
        }
        self.removed_docs += 1;
        self.removed_tokens += doc.token_count;
        self.noncompliant_ids.push(doc.id.clone());
        match verdict {
            Verdict::UnparseableUrl => self.unparseable += 1,
            _ => {
                if let Some(reg) = reg {
                    let diff = self.per_domain.entry(reg).or_default();
                    diff.docs_removed += 1;
                    diff.tokens_removed += doc.token_count;
                }
            }
        }
    }

    fn finish(self, skipped_invalid: u64) -> PartitionResult {
        let token_loss_fraction = if self.total_tokens == 0 {
            0.0
        } else {
            self.removed_tokens as f64 / self.total_tokens as f64
        };
        PartitionResult {
            summary: PartitionSummary {
                mode: self.mode.to_string(),
                total_docs: self.total_docs,
                total_tokens: self.total_tokens,
                removed_docs: self.removed_docs,
                removed_tokens: self.removed_tokens,
                token_loss_fraction,
                unparseable_url_docs: self.unparseable + self.unparseable_kept,
                skipped_invalid_lines: skipped_invalid,
                per_domain: self.per_domain,
            },
            compliant_ids: self.compliant_ids,
            noncompliant_ids: self.noncompliant_ids,
        }
    }
}

/// One row of the removal table: a domain and what filtering took from it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsRow {
    pub domain: String,
    pub docs_removed: u64,
    pub tokens_removed: u64,
}

/// Top-k removal table plus corpus-wide totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub top_k: usize,
    pub rows: Vec<StatsRow>,
    pub total_docs: u64,
    pub total_tokens: u64,
    pub removed_docs: u64,
    pub removed_tokens: u64,
    pub token_loss_fraction: f64,
}

/// Rank domains by documents removed (descending), ties broken
/// lexicographically, and keep the top `k`.
pub fn corpus_stats(summary: &PartitionSummary, k: usize) -> StatsReport {
    let mut rows: Vec<StatsRow> = summary
        .per_domain
        .iter()
        .map(|(domain, diff)| StatsRow {
            domain: domain.clone(),
            docs_removed: diff.docs_removed,
            tokens_removed: diff.tokens_removed,
        })
        .collect();
    rows.sort_by(|a, b| {
        b.docs_removed
            .cmp(&a.docs_removed)
            .then_with(|| a.domain.cmp(&b.domain))
    });
    rows.truncate(k);
    StatsReport {
        top_k: k,
        rows,
        total_docs: summary.total_docs,
        total_tokens: summary.total_tokens,
        removed_docs: summary.removed_docs,
        removed_tokens: summary.removed_tokens,
        token_loss_fraction: summary.token_loss_fraction,
    }
}

impl StatsReport {
    /// Render as CSV with a trailing totals row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("domain,docs_removed,tokens_removed\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{}\n",
                csv_field(&row.domain),
                row.docs_removed,
                row.tokens_removed
            ));
        }
        out.push_str(&format!(
            "TOTAL,{},{}\n",
            self.removed_docs, self.removed_tokens
        ));
        out
    }
}

/// Quote a CSV field if it contains a delimiter, quote, or newline.
pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
