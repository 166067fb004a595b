//! Benchmark gap reporting between two evaluation runs.
//!
//! The toolkit's final stage compares two trained models' benchmark scores:
//! a *baseline* run (trained on the compliant corpus) and a *treatment* run
//! (trained on the non-compliant corpus, or on a compliant corpus augmented
//! with some extra slice). The headline number is the signed score gap.
//!
//! # Sign convention
//!
//! **`gap = treatment − baseline`**, for every benchmark and for the
//! averages. With the compliant run as baseline, a *positive* gap means the
//! treatment (non-compliant or augmented) run scored higher — i.e. honoring
//! crawl opt-outs cost benchmark performance — and a *negative* gap means
//! the compliant run scored higher. Every emitted report repeats this
//! convention in its header so a reader never has to guess.
//!
//! All arithmetic is carried out in full `f64` precision; rounding to the
//! customary one decimal place happens only when rendering ([`round1`],
//! [`gap_csv`]). Because published score tables are themselves rounded to
//! one decimal, the report also carries the gap *between the displayed
//! (rounded) averages* — see [`GapReport::display_average_gap`] — which is
//! what a reader comparing two printed "Avg" cells would compute. The exact
//! and display-level averages can legitimately differ by a full rounding
//! step, so both are reported rather than silently picking one.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// Scores from one evaluation run: a label, the token budget the model was
/// trained on, and a map from benchmark name to score (a percentage).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResultSet {
    /// Human-readable run label, e.g. `"compliant"` or `"compliant+med"`.
    pub run_label: String,
    /// Number of training tokens consumed by the run.
    pub tokens_trained: u64,
    /// Benchmark name → score in percent. `BTreeMap` keeps emission order
    /// deterministic and benchmark names unique.
    pub scores: BTreeMap<String, f64>,
}

impl EvalResultSet {
    /// Check the structural invariants: at least one benchmark, non-empty
    /// benchmark names, and every score a finite value in `0.0..=100.0`.
    pub fn validate(&self) -> Result<(), ReportError> {
        if self.scores.is_empty() {
            return Err(ReportError::EmptyResultSet {
                label: self.run_label.clone(),
            });
        }
        for (name, &score) in &self.scores {
            if name.is_empty() {
                return Err(ReportError::EmptyBenchmarkName {
                    label: self.run_label.clone(),
                });
            }
            if !score.is_finite() || !(0.0..=100.0).contains(&score) {
                return Err(ReportError::ScoreOutOfRange {
                    label: self.run_label.clone(),
                    benchmark: name.clone(),
                    score,
                });
            }
        }
        Ok(())
    }
}

/// Errors from gap computation, aggregation, and report emission.
#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    /// The two result sets have no benchmark in common.
    #[error("no shared benchmarks between {baseline:?} and {treatment:?}")]
    NoSharedBenchmarks { baseline: String, treatment: String },
    /// A requested benchmark is absent from the result set.
    #[error("benchmark {benchmark:?} missing from result set {label:?}")]
    MissingBenchmark { label: String, benchmark: String },
    /// An average over zero benchmarks was requested.
    #[error("empty benchmark subset for result set {label:?}")]
    EmptySubset { label: String },
    /// A result set contains no scores at all.
    #[error("result set {label:?} contains no benchmark scores")]
    EmptyResultSet { label: String },
    /// A benchmark key is the empty string.
    #[error("result set {label:?} has an empty benchmark name")]
    EmptyBenchmarkName { label: String },
    /// A score is non-finite or outside the percentage range.
    #[error("result set {label:?}: score {score} for {benchmark:?} is outside 0..=100")]
    ScoreOutOfRange {
        label: String,
        benchmark: String,
        score: f64,
    },
    /// A result-set file could not be read.
    #[error("failed to read {path}")]
    UnreadableInput {
        path: String,
        #[source]
        source: std::io::Error,
    },
    /// A result-set file is not valid JSON of the expected shape.
    #[error("failed to parse {path} as an evaluation result set")]
    MalformedInput {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    /// A report file could not be written.
    #[error("failed to write {path}")]
    UnwritableOutput {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Load an [`EvalResultSet`] from a JSON file and validate it.
///
/// The file is a flat object:
///
/// ```json
/// {
///   "run_label": "compliant",
///   "tokens_trained": 100000000000,
///   "scores": { "arc_easy": 69.1, "winogrande": 57.5 }
/// }
/// ```
pub fn load_result_set(path: &Path) -> Result<EvalResultSet, ReportError> {
    let bytes = std::fs::read(path).map_err(|source| ReportError::UnreadableInput {
        path: path.display().to_string(),
        source,
    })?;
    let set: EvalResultSet =
        serde_json::from_slice(&bytes).map_err(|source| ReportError::MalformedInput {
            path: path.display().to_string(),
            source,
        })?;
    set.validate()?;
    Ok(set)
}

/// One benchmark's scores and signed gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapEntry {
    /// Baseline run's score.
    pub baseline: f64,
    /// Treatment run's score.
    pub treatment: f64,
    /// `treatment − baseline`.
    pub gap: f64,
    /// True when a noise threshold was supplied and `|gap|` falls below it.
    pub within_noise: bool,
}

/// The full gap report between a baseline and a treatment run.
///
/// Only benchmarks present in *both* result sets contribute gaps and
/// averages; benchmarks present on one side only are listed in
/// `missing_in_baseline` / `missing_in_treatment` rather than silently
/// dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// `run_label` of the baseline set.
    pub baseline_label: String,
    /// `run_label` of the treatment set.
    pub treatment_label: String,
    /// Baseline run's training-token budget.
    pub baseline_tokens: u64,
    /// Treatment run's training-token budget.
    pub treatment_tokens: u64,
    /// Per-benchmark scores and gaps, keyed by benchmark name.
    pub per_benchmark: BTreeMap<String, GapEntry>,
    /// Benchmarks scored by the treatment run but absent from the baseline.
    pub missing_in_baseline: Vec<String>,
    /// Benchmarks scored by the baseline run but absent from the treatment.
    pub missing_in_treatment: Vec<String>,
    /// Exact mean of the baseline scores over the shared benchmarks.
    pub baseline_avg: f64,
    /// Exact mean of the treatment scores over the shared benchmarks.
    pub treatment_avg: f64,
    /// Exact mean of the per-benchmark gaps. Equals
    /// `treatment_avg − baseline_avg` up to floating-point association.
    pub average_gap: f64,
    /// `round1(treatment_avg) − round1(baseline_avg)`: the gap a reader
    /// obtains by differencing the two one-decimal "Avg" cells of a printed
    /// score table. Display-level only; never feeds back into computation.
    pub display_average_gap: f64,
    /// The `within_noise` threshold used, if any.
    pub noise_threshold: Option<f64>,
}

/// Compute the signed per-benchmark gaps `treatment − baseline`.
///
/// `noise_threshold`, when supplied, flags every gap with `|gap| <
/// threshold` as [`GapEntry::within_noise`]; no statistical test is
/// performed — the flag is a plain magnitude comparison.
///
/// # Errors
///
/// [`ReportError::NoSharedBenchmarks`] when the two sets have no benchmark
/// name in common; validation errors when either set is malformed.
pub fn compute_dcg(
    baseline: &EvalResultSet,
    treatment: &EvalResultSet,
    noise_threshold: Option<f64>,
) -> Result<GapReport, ReportError> {
    baseline.validate()?;
    treatment.validate()?;

    let mut per_benchmark = BTreeMap::new();
    for (name, &b) in &baseline.scores {
        if let Some(&t) = treatment.scores.get(name) {
            let gap = t - b;
            let within_noise = noise_threshold.is_some_and(|th| gap.abs() < th);
            per_benchmark.insert(
                name.clone(),
                GapEntry {
                    baseline: b,
                    treatment: t,
                    gap,
                    within_noise,
                },
            );
        }
    }
    if per_benchmark.is_empty() {
        return Err(ReportError::NoSharedBenchmarks {
            baseline: baseline.run_label.clone(),
            treatment: treatment.run_label.clone(),
        });
    }

    let missing_in_baseline: Vec<String> = treatment
        .scores
        .keys()
        .filter(|name| !baseline.scores.contains_key(*name))
        .cloned()
        .collect();
    let missing_in_treatment: Vec<String> = baseline
        .scores
        .keys()
        .filter(|name| !treatment.scores.contains_key(*name))
        .cloned()
        .collect();

    let n = per_benchmark.len() as f64;
    let baseline_avg = per_benchmark.values().map(|e| e.baseline).sum::<f64>() / n;
    let treatment_avg = per_benchmark.values().map(|e| e.treatment).sum::<f64>() / n;
    let average_gap = per_benchmark.values().map(|e| e.gap).sum::<f64>() / n;
    let display_average_gap = round1(treatment_avg) - round1(baseline_avg);

    Ok(GapReport {
        baseline_label: baseline.run_label.clone(),
        treatment_label: treatment.run_label.clone(),
        baseline_tokens: baseline.tokens_trained,
        treatment_tokens: treatment.tokens_trained,
        per_benchmark,
        missing_in_baseline,
        missing_in_treatment,
        baseline_avg,
        treatment_avg,
        average_gap,
        display_average_gap,
        noise_threshold,
    })
}

/// Arithmetic mean of a result set's scores over a benchmark subset.
///
/// The mean is returned in full precision; round for display with
/// [`round1`]. The subset may be given in any order (the mean is summed in
/// the set's own sorted benchmark order, so permuting the subset cannot
/// change the result, bit for bit).
///
/// # Errors
///
/// [`ReportError::EmptySubset`] for an empty subset and
/// [`ReportError::MissingBenchmark`] when a requested benchmark is absent.
pub fn aggregate_average<'a, I>(set: &EvalResultSet, subset: I) -> Result<f64, ReportError>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut wanted: BTreeMap<&str, f64> = BTreeMap::new();
    for name in subset {
        match set.scores.get(name) {
            Some(&score) => {
                wanted.insert(name, score);
            }
            None => {
                return Err(ReportError::MissingBenchmark {
                    label: set.run_label.clone(),
                    benchmark: name.to_string(),
                });
            }
        }
    }
    if wanted.is_empty() {
        return Err(ReportError::EmptySubset {
            label: set.run_label.clone(),
        });
    }
    Ok(wanted.values().sum::<f64>() / wanted.len() as f64)
}

/// Round to one decimal place for display, halves away from zero.
///
/// Score tables conventionally print one decimal with `.x5` halves rounded
/// up in magnitude (42.75 → 42.8). Inputs are typically sums of
/// one-decimal values, whose binary representation can sit a few ulps off
/// the true half-way point, so values within `1e-9` of a half are treated
/// as exact halves before rounding. Display-only: computations keep full
/// precision.
pub fn round1(x: f64) -> f64 {
    let scaled = x * 10.0;
    let floor = scaled.floor();
    let frac = scaled - floor;
    let rounded = if (frac - 0.5).abs() < 1e-9 {
        // An exact (or drifted-exact) half: away from zero.
        if x >= 0.0 {
            floor + 1.0
        } else {
            floor
        }
    } else {
        scaled.round()
    };
    rounded / 10.0
}

/// Format a score or gap for display: one decimal via [`round1`], with a
/// negative zero normalized to `"0.0"`.
pub fn fmt1(x: f64) -> String {
    let r = round1(x);
    let r = if r == 0.0 { 0.0 } else { r };
    format!("{r:.1}")
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

/// Render a [`GapReport`] as CSV.
///
/// The header comments restate the sign convention; scores and gaps are
/// displayed to one decimal ([`fmt1`]). The final `AVERAGE` row carries the
/// rounded exact averages and, in the gap column, the display-level average
/// gap — the difference of the two rounded averages — so the row stays
/// arithmetically consistent with its own cells.
pub fn gap_csv(report: &GapReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# gap report: {} vs {}", report.treatment_label, report.baseline_label);
    let _ = writeln!(
        out,
        "# sign convention: gap = treatment ({}) - baseline ({}); positive = baseline scored lower",
        report.treatment_label, report.baseline_label
    );
    if let Some(th) = report.noise_threshold {
        let _ = writeln!(out, "# noise threshold: gaps with magnitude below {th} are flagged within_noise");
    }
    let _ = writeln!(out, "benchmark,baseline,treatment,gap,within_noise");
    for (name, entry) in &report.per_benchmark {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            crate::corpus::csv_field(name),
            fmt1(entry.baseline),
            fmt1(entry.treatment),
            fmt1(entry.gap),
            yes_no(entry.within_noise)
        );
    }
    let avg_within_noise = report
        .noise_threshold
        .is_some_and(|th| report.display_average_gap.abs() < th);
    let _ = writeln!(
        out,
        "AVERAGE,{},{},{},{}",
        fmt1(report.baseline_avg),
        fmt1(report.treatment_avg),
        fmt1(report.display_average_gap),
        yes_no(avg_within_noise)
    );
    for name in &report.missing_in_baseline {
        let _ = writeln!(out, "# missing in baseline: {name}");
    }
    for name in &report.missing_in_treatment {
        let _ = writeln!(out, "# missing in treatment: {name}");
    }
    out
}

/// Render a [`GapReport`] as pretty JSON (full precision, trailing newline).
pub fn gap_json(report: &GapReport) -> String {
    let mut out = serde_json::to_string_pretty(report).expect("gap report serializes");
    out.push('\n');
    out
}

/// Render bar-plot data: a tab-separated `benchmark<TAB>gap` table in full
/// precision, one row per shared benchmark, suitable for feeding a plotting
/// script directly.
pub fn gap_plot_data(report: &GapReport) -> String {
    let mut out = String::from("benchmark\tgap\n");
    for (name, entry) in &report.per_benchmark {
        let _ = writeln!(out, "{}\t{:.6}", name, entry.gap);
    }
    out
}

/// Output format for [`emit_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// One-decimal CSV with convention header (`dcg.csv`).
    Csv,
    /// Full-precision JSON (`dcg.json`).
    Json,
    /// Tab-separated plot data (`dcg_plot.tsv`).
    Plot,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "plot" => Ok(ReportFormat::Plot),
            other => Err(format!(
                "unknown report format {other:?} (expected csv, json, or plot)"
            )),
        }
    }
}

/// Write a [`GapReport`] to `dir` in the requested format and return the
/// path written. Emission is single-threaded and byte-deterministic: the
/// same report always produces the same file contents.
pub fn emit_report(
    report: &GapReport,
    dir: &Path,
    format: ReportFormat,
) -> Result<PathBuf, ReportError> {
    let (file_name, contents) = match format {
        ReportFormat::Csv => ("dcg.csv", gap_csv(report)),
        ReportFormat::Json => ("dcg.json", gap_json(report)),
        ReportFormat::Plot => ("dcg_plot.tsv", gap_plot_data(report)),
    };
    let path = dir.join(file_name);
    let write = |path: &Path, contents: &str| -> std::io::Result<()> {
        let mut file = std::fs::File::create(path)?;
        file.write_all(contents.as_bytes())?;
        file.flush()
    };
    write(&path, &contents).map_err(|source| ReportError::UnwritableOutput {
        path: path.display().to_string(),
        source,
    })?;
    Ok(path)
}
