//! Core library for auditing crawler-exclusion compliance of text corpora.
//!
//! The pipeline this crate supports, end to end:
//!
//! 1. [`rep`] — parse robots.txt files and answer allow/deny queries per the
//!    Robots Exclusion Protocol (RFC 9309), including wildcard patterns and
//!    longest-match precedence.
//! 2. [`timeline`] — retrieve archived robots.txt snapshots (one per calendar
//!    month) through a web-archive endpoint, cache them on disk, and derive
//!    per-domain block timelines for a list of AI crawler agents.
//! 3. [`corpus`] — stream NDJSON corpora, resolve registrable domains, and
//!    partition documents into compliant / non-compliant halves against the
//!    retrieved policies, with token-accurate removal accounting.
//! 4. [`overlap`] — detect 50-gram (configurable) token overlap between a
//!    corpus and target document sets via a rolling-hash index.
//! 5. [`metrics`] — memorization metrics over prefix-continuation pairs
//!    (longest common contiguous subsequence, BLEU) and multiple-choice
//!    benchmark scoring.
//! 6. [`report`] — compare paired evaluation runs and report the per-benchmark
//!    and average compliance gap.
//!
//! Everything is deterministic: fixed hash seeds, ordered maps in outputs, and
//! worker-count-independent parallel reductions.

pub mod blocklist;
pub mod corpus;
pub mod domain;
pub mod metrics;
pub mod month;
pub mod ndjson;
pub mod overlap;
pub mod rep;
pub mod report;
pub mod timeline;
pub mod tokenize;
