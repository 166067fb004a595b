//! Memorization metrics over prefix-continuation pairs, plus
//! multiple-choice benchmark scoring.
//!
//! * [`extract_prefix`] splits an article into prompt and reference
//!   continuation (articles shorter than the prompt are rejected).
//! * [`lccs_len`] — length of the longest common *contiguous* subsequence of
//!   two token sequences, via a suffix automaton over the first sequence:
//!   O(|a|·σ) build, O(|b|) walk, instead of the quadratic DP.
//! * [`bleu`] — modified n-gram precision BLEU with clipped counts, brevity
//!   penalty against the closest reference length, and an additive epsilon
//!   only where a clipped count is zero, so a verbatim candidate scores
//!   exactly 1.0.
//! * [`score_mcq`] — accuracy over multiple-choice items given a prediction
//!   file; supports both question/options records and
//!   completion-vs-contradictions records.

use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::tokenize::TokenizerConfig;

pub const BLEU_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("article too short: prefix needs {needed} tokens plus a continuation, got {got}")]
    TooShort { needed: usize, got: usize },
}

/// Split `tokens` into a `prefix_len`-token prompt and its reference
/// continuation. `horizon` caps the continuation length; `0` means
/// to-end-of-article. Articles without at least one continuation token are
/// errors — they cannot anchor a memorization probe.
pub fn extract_prefix(
    tokens: &[String],
    prefix_len: usize,
    horizon: usize,
) -> Result<(Vec<String>, Vec<String>), MetricsError> {
    if tokens.len() <= prefix_len {
        return Err(MetricsError::TooShort {
            needed: prefix_len,
            got: tokens.len(),
        });
    }
    let prefix = tokens[..prefix_len].to_vec();
    let end = if horizon == 0 {
        tokens.len()
    } else {
        tokens.len().min(prefix_len + horizon)
    };
    Ok((prefix, tokens[prefix_len..end].to_vec()))
}

// ---------------------------------------------------------------------------
// Longest common contiguous subsequence
// ---------------------------------------------------------------------------

struct SamState {
    len: u32,
    link: i32,
    next: HashMap<u32, u32>,
}

/// Suffix automaton over a sequence of interned symbols.
struct SuffixAutomaton {
    states: Vec<SamState>,
    last: usize,
}

impl SuffixAutomaton {
    fn new() -> Self {
        SuffixAutomaton {
            states: vec![SamState {
                len: 0,
                link: -1,
                next: HashMap::new(),
            }],
            last: 0,
        }
    }

    fn extend(&mut self, c: u32) {
        let cur = self.states.len();
        let cur_len = self.states[self.last].len + 1;
        self.states.push(SamState {
            len: cur_len,
            link: 0,
            next: HashMap::new(),
        });
        let mut p = self.last as i32;
        while p >= 0 && !self.states[p as usize].next.contains_key(&c) {
            self.states[p as usize].next.insert(c, cur as u32);
            p = self.states[p as usize].link;
        }
        if p == -1 {
            self.states[cur].link = 0;
        } else {
            let q = self.states[p as usize].next[&c] as usize;
            if self.states[q].len == self.states[p as usize].len + 1 {
                self.states[cur].link = q as i32;
            } else {
                let clone = self.states.len();
                let cloned = SamState {
                    len: self.states[p as usize].len + 1,
                    link: self.states[q].link,
                    next: self.states[q].next.clone(),
                };
                self.states.push(cloned);
                while p >= 0 && self.states[p as usize].next.get(&c) == Some(&(q as u32)) {
                    self.states[p as usize].next.insert(c, clone as u32);
                    p = self.states[p as usize].link;
                }
                self.states[q].link = clone as i32;
                self.states[cur].link = clone as i32;
            }
        }
        self.last = cur;
    }
}

/// Length (in tokens) of the longest common contiguous subsequence of `a`
/// and `b`. Symmetric; 0 when either side is empty.
pub fn lccs_len<T: Eq + Hash>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    // Intern symbols. Symbols of `b` unseen in `a` get fresh ids, which
    // simply never match an automaton edge.
    let mut ids: HashMap<&T, u32> = HashMap::new();
    let mut a_ids: Vec<u32> = Vec::with_capacity(a.len());
    for t in a {
        let next = ids.len() as u32;
        a_ids.push(*ids.entry(t).or_insert(next));
    }
    let mut b_ids: Vec<u32> = Vec::with_capacity(b.len());
    for t in b {
        let next = ids.len() as u32;
        b_ids.push(*ids.entry(t).or_insert(next));
    }
    drop(ids);

    let mut sam = SuffixAutomaton::new();
    for &c in &a_ids {
        sam.extend(c);
    }

    let mut v = 0usize;
    let mut l = 0usize;
    let mut best = 0usize;
    for &c in &b_ids {
        loop {
            if let Some(&to) = sam.states[v].next.get(&c) {
                v = to as usize;
                l += 1;
                break;
            }
            if v == 0 {
                l = 0;
                break;
            }
            v = sam.states[v].link as usize;
            l = sam.states[v].len as usize;
        }
        best = best.max(l);
    }
    best
}

// ---------------------------------------------------------------------------
// BLEU
// ---------------------------------------------------------------------------

/// BLEU with modified (clipped) n-gram precisions for n = 1..=`max_n`.
///
/// Orders where the candidate has no windows are skipped rather than scored
/// zero; a clipped count of zero contributes [`BLEU_EPSILON`] instead. The
/// brevity penalty uses the reference length closest to the candidate's
/// (ties resolved toward the shorter reference). Returns a value in [0, 1];
/// an empty candidate or empty reference set scores 0.
pub fn bleu(candidate: &[String], references: &[Vec<String>], max_n: usize) -> f64 {
    if candidate.is_empty() || references.is_empty() || max_n == 0 {
        return 0.0;
    }
    let c = candidate.len();
    let r = references
        .iter()
        .map(|r| r.len())
        .min_by_key(|&len| (len.abs_diff(c), len))
        .expect("non-empty references");

    let mut log_sum = 0.0f64;
    let mut orders_used = 0u32;
    for n in 1..=max_n {
        if c < n {
            break;
        }
        let total = (c - n + 1) as f64;
        let mut cand_counts: HashMap<&[String], u64> = HashMap::new();
        for w in candidate.windows(n) {
            *cand_counts.entry(w).or_insert(0) += 1;
        }
        let mut ref_counts: HashMap<&[String], u64> = HashMap::new();
        for reference in references {
            if reference.len() < n {
                continue;
            }
            let mut this_ref: HashMap<&[String], u64> = HashMap::new();
            for w in reference.windows(n) {
                *this_ref.entry(w).or_insert(0) += 1;
            }
            for (w, count) in this_ref {
                let entry = ref_counts.entry(w).or_insert(0);
                *entry = (*entry).max(count);
            }
        }
        let clipped: u64 = cand_counts
            .iter()
            .map(|(w, &count)| count.min(ref_counts.get(w).copied().unwrap_or(0)))
            .sum();
        let numerator = if clipped == 0 {
            BLEU_EPSILON
        } else {
            clipped as f64
        };
        log_sum += (numerator / total).ln();
        orders_used += 1;
    }
    if orders_used == 0 {
        return 0.0;
    }
    let precision = (log_sum / orders_used as f64).exp();
    let brevity = if c > r {
        1.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    };
    brevity * precision
}

// ---------------------------------------------------------------------------
// Prefix-pair scoring
// ---------------------------------------------------------------------------

/// One generation to score: the model was prompted with `prefix_tokens`
/// tokens of an article and produced `generation`; `reference` is the true
/// continuation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrefixPair {
    pub article_id: String,
    pub prefix_tokens: u32,
    pub reference: String,
    pub generation: String,
}

/// Load a pairs NDJSON file; invalid lines are skipped and counted.
pub fn load_pairs(path: &Path) -> io::Result<(Vec<PrefixPair>, u64)> {
    let text = std::fs::read_to_string(path)?;
    let mut pairs = Vec::new();
    let mut skipped = 0u64;
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<PrefixPair>(line) {
            Ok(p) => pairs.push(p),
            Err(_) => skipped += 1,
        }
    }
    Ok((pairs, skipped))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub article_id: String,
    pub prefix_tokens: u32,
    /// LCCS between generation and reference, in tokens.
    pub lccs: u64,
    /// BLEU of the generation against the single reference, in [0, 1].
    pub bleu: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreStats {
    pub pairs: u64,
    pub mean_lccs: f64,
    pub mean_bleu: f64,
}

/// Per-pair scores plus means, overall and bucketed by prompt length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemorizationReport {
    pub tokenizer_hash: String,
    pub max_n: usize,
    pub overall: ScoreStats,
    pub by_prefix: BTreeMap<u32, ScoreStats>,
    pub pairs: Vec<PairScore>,
}

pub fn memorization_report(
    pairs: &[PrefixPair],
    tokenizer: &TokenizerConfig,
    max_n: usize,
) -> MemorizationReport {
    let mut scored = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let reference = tokenizer.tokenize(&pair.reference);
        let generation = tokenizer.tokenize(&pair.generation);
        scored.push(PairScore {
            article_id: pair.article_id.clone(),
            prefix_tokens: pair.prefix_tokens,
            lccs: lccs_len(&generation, &reference) as u64,
            bleu: bleu(&generation, std::slice::from_ref(&reference), max_n),
        });
    }

    let stats_of = |subset: &[&PairScore]| -> ScoreStats {
        if subset.is_empty() {
            return ScoreStats::default();
        }
        let n = subset.len() as f64;
        ScoreStats {
            pairs: subset.len() as u64,
            mean_lccs: subset.iter().map(|p| p.lccs as f64).sum::<f64>() / n,
            mean_bleu: subset.iter().map(|p| p.bleu).sum::<f64>() / n,
        }
    };

    let all: Vec<&PairScore> = scored.iter().collect();
    let overall = stats_of(&all);
    let mut by_prefix: BTreeMap<u32, ScoreStats> = BTreeMap::new();
    let mut buckets: BTreeMap<u32, Vec<&PairScore>> = BTreeMap::new();
    for p in &scored {
        buckets.entry(p.prefix_tokens).or_default().push(p);
    }
    for (k, subset) in buckets {
        by_prefix.insert(k, stats_of(&subset));
    }

    MemorizationReport {
        tokenizer_hash: tokenizer.config_hash(),
        max_n,
        overall,
        by_prefix,
        pairs: scored,
    }
}

// ---------------------------------------------------------------------------
// Multiple-choice scoring
// ---------------------------------------------------------------------------

/// One multiple-choice item: labeled options and the gold label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkItem {
    pub id: String,
    pub question: String,
    /// (label, option text) in label order.
    pub options: Vec<(String, String)>,
    pub answer: String,
}

/// Load a benchmark NDJSON file. Two record shapes are accepted:
///
/// * question records — `question`, options under `"A"`..`"D"`, gold label
///   in `answer`;
/// * completion records — `full_prefix` plus `completion` and
///   `contradiction_0..2`; options become A–D in that order with `A` gold.
///
/// Records without an `id` get their zero-based line index as id. Returns
/// the items and the count of skipped invalid lines.
pub fn load_benchmark(path: &Path) -> io::Result<(Vec<BenchmarkItem>, u64)> {
    let text = std::fs::read_to_string(path)?;
    let mut items = Vec::new();
    let mut skipped = 0u64;
    for (line_no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let Ok(value) = serde_json::from_str::<serde_json::Value>(line) else {
            skipped += 1;
            continue;
        };
        let id = match value.get("id") {
            Some(serde_json::Value::String(s)) => s.clone(),
            Some(serde_json::Value::Number(n)) => n.to_string(),
            _ => line_no.to_string(),
        };
        let str_field = |key: &str| value.get(key).and_then(|v| v.as_str()).map(str::to_string);
        let item = if let (Some(question), Some(answer)) =
            (str_field("question"), str_field("answer"))
        {
            let mut options = Vec::new();
            for label in ["A", "B", "C", "D"] {
                if let Some(text) = str_field(label) {
                    options.push((label.to_string(), text));
                }
            }
            if options.len() < 2 {
                skipped += 1;
                continue;
            }
            let answer = answer.trim().to_uppercase();
            if !options.iter().any(|(l, _)| *l == answer) {
                skipped += 1;
                continue;
            }
            BenchmarkItem {
                id,
                question,
                options,
                answer,
            }
        } else if let Some(prefix) = str_field("full_prefix") {
            let fields = [
                str_field("completion"),
                str_field("contradiction_0"),
                str_field("contradiction_1"),
                str_field("contradiction_2"),
            ];
            if fields.iter().any(Option::is_none) {
                skipped += 1;
                continue;
            }
            let labels = ["A", "B", "C", "D"];
            BenchmarkItem {
                id,
                question: prefix,
                options: labels
                    .iter()
                    .zip(fields)
                    .map(|(l, f)| (l.to_string(), f.expect("checked")))
                    .collect(),
                answer: "A".to_string(),
            }
        } else {
            skipped += 1;
            continue;
        };
        items.push(item);
    }
    Ok((items, skipped))
}

/// Load a predictions CSV (`id,label` rows, optional header). Later rows for
/// a repeated id replace earlier ones.
pub fn load_predictions(path: &Path) -> io::Result<HashMap<String, String>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = HashMap::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line_no == 0 && line.eq_ignore_ascii_case("id,label") {
            continue;
        }
        if let Some((id, label)) = line.split_once(',') {
            out.insert(id.trim().to_string(), label.trim().to_string());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct McqScore {
    pub total: u64,
    pub correct: u64,
    /// Items with no prediction at all (counted as incorrect).
    pub missing: u64,
    /// Predictions whose label is not one of the item's options (incorrect).
    pub invalid_label: u64,
    /// `100 * correct / total`.
    pub accuracy_pct: f64,
}

pub fn score_mcq(items: &[BenchmarkItem], predictions: &HashMap<String, String>) -> McqScore {
    let mut score = McqScore {
        total: items.len() as u64,
        ..Default::default()
    };
    for item in items {
        match predictions.get(&item.id) {
            None => score.missing += 1,
            Some(label) => {
                let label = label.trim().to_uppercase();
                if !item.options.iter().any(|(l, _)| *l == label) {
                    score.invalid_label += 1;
                } else if label == item.answer {
                    score.correct += 1;
                }
            }
        }
    }
    score.accuracy_pct = if score.total == 0 {
        0.0
    } else {
        100.0 * score.correct as f64 / score.total as f64
    };
    score
}
