//! Token-level n-gram overlap between a corpus and named target sets.
//!
//! The question answered: which corpus documents share at least one exact
//! n-token window (n = 50 by default) with any document of a target set —
//! the standard proxy for "was this evaluation document in the training
//! data". Targets are indexed once; the corpus streams past the index.
//!
//! Windows are fingerprinted with a polynomial rolling hash over per-token
//! FNV-1a hashes. Two independent 64-bit hashes are computed and combined
//! into one 128-bit digest, so a spurious cross-document collision needs to
//! defeat both simultaneously; `verify` mode additionally re-compares raw
//! token windows on every hit and rejects any digest collision outright. All
//! constants are fixed: fingerprints are stable across runs and platforms.

use std::collections::{BTreeMap, HashMap};
use std::io;

use serde::{Deserialize, Serialize};

use crate::ndjson::NdjsonReader;
use crate::tokenize::TokenizerConfig;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
/// Seeds that decorrelate the two token-hash streams.
const SEED_A: u64 = 0x9e37_79b9_7f4a_7c15;
const SEED_B: u64 = 0xc2b2_ae3d_27d4_eb4f;
/// Polynomial bases (odd, so multiplication is invertible mod 2^64).
const BASE_A: u64 = 0x0000_0001_0000_01b5;
const BASE_B: u64 = 0x0000_0001_0000_0d1f;

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET ^ seed;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Incremental two-lane polynomial hash over a fixed-width token window.
struct RollingWindow {
    n: usize,
    pow_a: u64, // BASE_A^(n-1)
    pow_b: u64,
    hash_a: u64,
    hash_b: u64,
    ring: Vec<(u64, u64)>,
    filled: usize,
    head: usize,
}

impl RollingWindow {
    fn new(n: usize) -> Self {
        let mut pow_a = 1u64;
        let mut pow_b = 1u64;
        for _ in 1..n {
            pow_a = pow_a.wrapping_mul(BASE_A);
            pow_b = pow_b.wrapping_mul(BASE_B);
        }
        RollingWindow {
            n,
            pow_a,
            pow_b,
            hash_a: 0,
            hash_b: 0,
            ring: vec![(0, 0); n],
            filled: 0,
            head: 0,
        }
    }

    /// Push one token; returns the window digest once `n` tokens are in.
    fn push(&mut self, token: &str) -> Option<u128> {
        let ta = fnv1a(SEED_A, token.as_bytes());
        let tb = fnv1a(SEED_B, token.as_bytes());
        if self.filled == self.n {
            let (oa, ob) = self.ring[self.head];
            self.hash_a = self.hash_a.wrapping_sub(oa.wrapping_mul(self.pow_a));
            self.hash_b = self.hash_b.wrapping_sub(ob.wrapping_mul(self.pow_b));
        } else {
            self.filled += 1;
        }
        self.ring[self.head] = (ta, tb);
        self.head = (self.head + 1) % self.n;
        self.hash_a = self.hash_a.wrapping_mul(BASE_A).wrapping_add(ta);
        self.hash_b = self.hash_b.wrapping_mul(BASE_B).wrapping_add(tb);
        if self.filled == self.n {
            Some(((self.hash_a as u128) << 64) | self.hash_b as u128)
        } else {
            None
        }
    }
}

/// Digest of one n-token window, computed non-incrementally (the oracle the
/// rolling version must agree with; also used for spot checks).
pub fn window_digest(tokens: &[String]) -> u128 {
    let mut w = RollingWindow::new(tokens.len());
    let mut out = None;
    for t in tokens {
        out = w.push(t);
    }
    out.expect("window_digest requires at least one token")
}

#[derive(Debug, thiserror::Error)]
pub enum OverlapError {
    #[error(
        "tokenizer mismatch: index built with config {index_hash}, scan using {scan_hash}"
    )]
    TokenizerMismatch { index_hash: String, scan_hash: String },
    #[error("too many targets: {0} (at most 64 supported)")]
    TooManyTargets(usize),
    #[error("verify mode requires an index built with audit records")]
    AuditMissing,
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetStats {
    /// Documents indexed for this target.
    pub docs: u64,
    /// Documents too short to contain a single n-token window.
    pub sub_n_docs: u64,
    /// Windows contributed to the index.
    pub windows: u64,
}

/// Immutable n-gram fingerprint index over one or more named target sets.
pub struct NgramIndex {
    n: usize,
    tokenizer: TokenizerConfig,
    tokenizer_hash: String,
    target_names: Vec<String>,
    target_stats: Vec<TargetStats>,
    /// window digest → bitmask of targets containing that window.
    digests: HashMap<u128, u64>,
    /// digest → one raw token window that produced it (verify mode only).
    audit: Option<HashMap<u128, Vec<String>>>,
}

/// Builder for [`NgramIndex`]. Add targets in a fixed order; the order is
/// part of the index identity (bitmask assignment).
pub struct IndexBuilder {
    index: NgramIndex,
}

impl NgramIndex {
    pub fn builder(n: usize, tokenizer: TokenizerConfig) -> IndexBuilder {
        assert!(n >= 1, "window size must be at least 1");
        let tokenizer_hash = tokenizer.config_hash();
        IndexBuilder {
            index: NgramIndex {
                n,
                tokenizer,
                tokenizer_hash,
                target_names: Vec::new(),
                target_stats: Vec::new(),
                digests: HashMap::new(),
                audit: None,
            },
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tokenizer_hash(&self) -> &str {
        &self.tokenizer_hash
    }

    pub fn target_names(&self) -> &[String] {
        &self.target_names
    }

    pub fn stats(&self) -> impl Iterator<Item = (&str, &TargetStats)> {
        self.target_names
            .iter()
            .map(String::as_str)
            .zip(self.target_stats.iter())
    }

    pub fn distinct_windows(&self) -> usize {
        self.digests.len()
    }
}

impl IndexBuilder {
    /// Keep one raw token window per digest so scans can verify hits exactly.
    pub fn with_audit(mut self) -> Self {
        self.index.audit = Some(HashMap::new());
        self
    }

    fn target_bit(&mut self, name: &str) -> Result<u64, OverlapError> {
        let idx = match self.index.target_names.iter().position(|t| t == name) {
            Some(i) => i,
            None => {
                if self.index.target_names.len() >= 64 {
                    return Err(OverlapError::TooManyTargets(
                        self.index.target_names.len() + 1,
                    ));
                }
                self.index.target_names.push(name.to_string());
                self.index.target_stats.push(TargetStats::default());
                self.index.target_names.len() - 1
            }
        };
        Ok(1u64 << idx)
    }

    /// Index one target document.
    pub fn add_doc(&mut self, target: &str, text: &str) -> Result<(), OverlapError> {
        let bit = self.target_bit(target)?;
        let idx = bit.trailing_zeros() as usize;
        let tokens = self.index.tokenizer.tokenize(text);
        let stats = &mut self.index.target_stats[idx];
        stats.docs += 1;
        if tokens.len() < self.index.n {
            stats.sub_n_docs += 1;
            return Ok(());
        }
        let mut window = RollingWindow::new(self.index.n);
        for (pos, token) in tokens.iter().enumerate() {
            if let Some(digest) = window.push(token) {
                stats.windows += 1;
                *self.index.digests.entry(digest).or_insert(0) |= bit;
                if let Some(audit) = &mut self.index.audit {
                    audit
                        .entry(digest)
                        .or_insert_with(|| tokens[pos + 1 - self.index.n..=pos].to_vec());
                }
            }
        }
        Ok(())
    }

    /// Index every document of an NDJSON stream under one target name.
    pub fn add_target(
        &mut self,
        target: &str,
        reader: &mut NdjsonReader,
    ) -> Result<(), OverlapError> {
        self.target_bit(target)?; // register even if the stream is empty
        while let Some(doc) = reader.next_record()? {
            self.add_doc(target, &doc.text)?;
        }
        Ok(())
    }

    pub fn build(self) -> NgramIndex {
        self.index
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ScanOptions {
    /// Keep up to this many example matches in the report.
    pub samples: usize,
    /// Re-compare raw token windows on every digest hit; reject collisions.
    pub verify: bool,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            samples: 0,
            verify: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleMatch {
    pub doc_id: String,
    pub target: String,
    /// Token offset of the matching window in the corpus document.
    pub window_start: usize,
    /// The matching window's tokens, space-joined.
    pub window: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetOverlap {
    /// Corpus documents sharing ≥1 window with this target.
    pub matched_docs: u64,
    /// Total corpus documents scanned (the fraction's denominator).
    pub corpus_docs: u64,
    /// Target documents indexed / too short, echoed from the index.
    pub target_docs: u64,
    pub target_sub_n_docs: u64,
}

impl TargetOverlap {
    pub fn matched_fraction(&self) -> f64 {
        if self.corpus_docs == 0 {
            0.0
        } else {
            self.matched_docs as f64 / self.corpus_docs as f64
        }
    }

    /// The fraction as a percentage, the customary reporting scale.
    pub fn matched_pct(&self) -> f64 {
        self.matched_fraction() * 100.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub n: usize,
    pub tokenizer_hash: String,
    pub corpus_docs: u64,
    /// Corpus documents with fewer than n tokens (they can match nothing).
    pub corpus_sub_n_docs: u64,
    /// Hits rejected by verify mode because the raw windows differed.
    pub collisions_rejected: u64,
    pub per_target: BTreeMap<String, TargetOverlap>,
    pub samples: Vec<SampleMatch>,
}

impl OverlapReport {
    /// `target,matched_docs,total_docs,matched_pct` rows, targets sorted by
    /// name. `total_docs` is the number of corpus documents scanned;
    /// `matched_pct` is the matched percentage to three decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("target,matched_docs,total_docs,matched_pct\n");
        for (name, t) in &self.per_target {
            out.push_str(&format!(
                "{},{},{},{:.3}\n",
                crate::corpus::csv_field(name),
                t.matched_docs,
                t.corpus_docs,
                t.matched_pct()
            ));
        }
        out
    }
}

/// Scan a corpus stream against the index.
///
/// The corpus must be tokenized with the same configuration the index was
/// built with; a hash mismatch is an error, not a silent wrong answer.
pub fn scan(
    reader: &mut NdjsonReader,
    index: &NgramIndex,
    corpus_tokenizer: &TokenizerConfig,
    opts: ScanOptions,
) -> Result<OverlapReport, OverlapError> {
    let scan_hash = corpus_tokenizer.config_hash();
    if scan_hash != index.tokenizer_hash {
        return Err(OverlapError::TokenizerMismatch {
            index_hash: index.tokenizer_hash.clone(),
            scan_hash,
        });
    }
    if opts.verify && index.audit.is_none() {
        return Err(OverlapError::AuditMissing);
    }

    let mut matched_per_target: Vec<u64> = vec![0; index.target_names.len()];
    let mut corpus_docs = 0u64;
    let mut corpus_sub_n = 0u64;
    let mut collisions = 0u64;
    let mut samples = Vec::new();

    while let Some(doc) = reader.next_record()? {
        corpus_docs += 1;
        let tokens = index.tokenizer.tokenize(&doc.text);
        if tokens.len() < index.n {
            corpus_sub_n += 1;
            continue;
        }
        let mut window = RollingWindow::new(index.n);
        let mut doc_mask = 0u64;
        for (pos, token) in tokens.iter().enumerate() {
            let Some(digest) = window.push(token) else { continue };
            let Some(&mask) = index.digests.get(&digest) else {
                continue;
            };
            if opts.verify {
                let expected = index
                    .audit
                    .as_ref()
                    .expect("checked above")
                    .get(&digest)
                    .expect("audit has every digest");
                let start = pos + 1 - index.n;
                if &tokens[start..=pos] != expected.as_slice() {
                    collisions += 1;
                    continue;
                }
            }
            let fresh = mask & !doc_mask;
            if fresh != 0 {
                doc_mask |= mask;
                for idx in 0..index.target_names.len() {
                    if fresh & (1 << idx) != 0 {
                        matched_per_target[idx] += 1;
                        if samples.len() < opts.samples {
                            let start = pos + 1 - index.n;
                            samples.push(SampleMatch {
                                doc_id: doc.id.clone(),
                                target: index.target_names[idx].clone(),
                                window_start: start,
                                window: tokens[start..=pos].join(" "),
                            });
                        }
                    }
                }
            }
            // Once a document has matched every target there is nothing left
            // to attribute; samples only record first matches anyway.
            if doc_mask.count_ones() as usize == index.target_names.len() {
                break;
            }
        }
    }

    let per_target = index
        .target_names
        .iter()
        .enumerate()
        .map(|(idx, name)| {
            (
                name.clone(),
                TargetOverlap {
                    matched_docs: matched_per_target[idx],
                    corpus_docs,
                    target_docs: index.target_stats[idx].docs,
                    target_sub_n_docs: index.target_stats[idx].sub_n_docs,
                },
            )
        })
        .collect();

    Ok(OverlapReport {
        n: index.n,
        tokenizer_hash: index.tokenizer_hash.clone(),
        corpus_docs,
        corpus_sub_n_docs: corpus_sub_n,
        collisions_rejected: collisions,
        per_target,
        samples,
    })
}
