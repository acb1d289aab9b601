use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::exact_match;
use crate::category::QuestionCategory;
use crate::pipeline::{PipelineResult, QuestionRecord};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ScoringError {
    #[error("sample {sample_id} question {qid} has no gold answer")]
    MissingGold { sample_id: String, qid: usize },
}

/// Which answer of each record is scored.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerSource {
    #[default]
    Final,
    Baseline,
}

#[derive(Clone, Debug, Default)]
pub struct AggregateOptions {
    pub answer: AnswerSource,
    /// Categories left out of the per-category table and the overall score.
    pub exclude: BTreeSet<QuestionCategory>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryScore {
    pub category: QuestionCategory,
    pub n: usize,
    pub correct: usize,
    /// Percent.
    pub exact_match: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

/// Router confusion: rows are gold categories, columns predicted ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub labels: Vec<QuestionCategory>,
    pub counts: Vec<Vec<u64>>,
    /// Each row divided by its sum; all-zero rows stay zero.
    pub normalized: Vec<Vec<f64>>,
}

impl Confusion {
    fn new() -> Self {
        let k = QuestionCategory::ALL.len();
        Confusion { labels: QuestionCategory::ALL.to_vec(), counts: vec![vec![0; k]; k], normalized: vec![vec![0.0; k]; k] }
    }

    fn finish(&mut self) {
        for (row, out) in self.counts.iter().zip(self.normalized.iter_mut()) {
            let sum: u64 = row.iter().sum();
            if sum > 0 {
                for (o, &c) in out.iter_mut().zip(row) {
                    *o = c as f64 / sum as f64;
                }
            }
        }
    }

    pub fn off_diagonal(&self) -> u64 {
        let mut n = 0;
        for (i, row) in self.counts.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                if i != j {
                    n += c;
                }
            }
        }
        n
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("gold\\predicted");
        for l in &self.labels {
            out.push(',');
            out.push_str(l.as_str());
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(&self.counts) {
            out.push_str(l.as_str());
            for c in row {
                let _ = write!(out, ",{c}");
            }
            out.push('\n');
        }
        out
    }
}

/// Stages shown in the runtime breakdown; direct QA is left out.
pub const FIG_STAGES: [&str; 4] = ["tsr_serialize", "route_plan", "execute", "repair"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Throughput {
    pub questions: usize,
    /// Sum of per-sample pipeline wall-clock seconds.
    pub total_runtime: f64,
    pub direct_qa_runtime: f64,
    /// `total_runtime / direct_qa_runtime`; `None` when direct QA took no measurable time.
    pub overhead_e2e: Option<f64>,
    /// `questions / total_runtime`.
    pub qps: Option<f64>,
    pub stage_seconds: BTreeMap<String, f64>,
    /// Share of each non-direct stage in their combined time.
    pub stage_fractions: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub answer: AnswerSource,
    pub per_category: Vec<CategoryScore>,
    pub n: usize,
    pub overall: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overall_delta: Option<f64>,
    /// `None` when no record carries a predicted category.
    pub route_acc: Option<f64>,
    pub confusion: Confusion,
    pub throughput: Throughput,
}

fn answer_of(r: &QuestionRecord, source: AnswerSource) -> &str {
    match source {
        AnswerSource::Final => &r.final_answer,
        AnswerSource::Baseline => &r.baseline,
    }
}

fn percent(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

fn throughput(results: &[PipelineResult], questions: usize) -> Throughput {
    let total_runtime: f64 = results.iter().map(|r| r.elapsed).sum();
    let mut stage_seconds: BTreeMap<String, f64> = BTreeMap::new();
    for r in results {
        let t = &r.stage_timings;
        for (k, v) in t.as_map() {
            *stage_seconds.entry(k.to_string()).or_default() += v;
        }
    }
    let get = |k: &str| stage_seconds.get(k).copied().unwrap_or(0.0);
    let direct_qa_runtime = get("direct_qa");
    let shown = [get("tsr_serialize"), get("route") + get("plan"), get("execute"), get("repair")];
    let shown_total: f64 = shown.iter().sum();
    let stage_fractions = FIG_STAGES
        .iter()
        .zip(shown)
        .map(|(k, v)| (k.to_string(), if shown_total > 0.0 { v / shown_total } else { 0.0 }))
        .collect();
    Throughput {
        questions,
        total_runtime,
        direct_qa_runtime,
        overhead_e2e: (direct_qa_runtime > 0.0).then(|| total_runtime / direct_qa_runtime),
        qps: (total_runtime > 0.0).then(|| questions as f64 / total_runtime),
        stage_seconds,
        stage_fractions,
    }
}

/// Folds per-question records into a report. With `baseline`, per-category
/// and overall deltas are filled in as percentage points.
pub fn aggregate(
    results: &[PipelineResult],
    opts: &AggregateOptions,
    baseline: Option<&EvalReport>,
) -> Result<EvalReport, ScoringError> {
    let records: Vec<&QuestionRecord> = results.iter().flat_map(|r| &r.questions).collect();
    if let Some(r) = records.iter().find(|r| r.gold_answer.trim().is_empty()) {
        return Err(ScoringError::MissingGold { sample_id: r.sample_id.clone(), qid: r.qid });
    }

    let mut tallies: BTreeMap<QuestionCategory, (usize, usize)> = BTreeMap::new();
    let mut confusion = Confusion::new();
    let (mut routed, mut route_hits) = (0usize, 0usize);
    for r in &records {
        if let Some(p) = r.predicted_category {
            routed += 1;
            route_hits += usize::from(p == r.gold_category);
            confusion.counts[r.gold_category.index()][p.index()] += 1;
        }
        if opts.exclude.contains(&r.gold_category) {
            continue;
        }
        let t = tallies.entry(r.gold_category).or_default();
        t.0 += 1;
        t.1 += usize::from(exact_match(answer_of(r, opts.answer), &r.gold_answer));
    }
    confusion.finish();

    let base_em = |c: QuestionCategory| baseline?.per_category.iter().find(|s| s.category == c).map(|s| s.exact_match);
    let per_category: Vec<CategoryScore> = QuestionCategory::ALL
        .iter()
        .filter_map(|c| tallies.get(c).map(|&(n, correct)| (*c, n, correct)))
        .map(|(category, n, correct)| {
            let exact_match = percent(correct, n);
            CategoryScore { category, n, correct, exact_match, delta: base_em(category).map(|b| exact_match - b) }
        })
        .collect();
    let n: usize = per_category.iter().map(|s| s.n).sum();
    let weighted: f64 = per_category.iter().map(|s| s.n as f64 * s.exact_match).sum();
    let overall = if n == 0 { 0.0 } else { weighted / n as f64 };

    Ok(EvalReport {
        answer: opts.answer,
        per_category,
        n,
        overall,
        overall_delta: baseline.map(|b| overall - b.overall),
        route_acc: (routed > 0).then(|| percent(route_hits, routed)),
        confusion,
        throughput: throughput(results, records.len()),
    })
}

impl EvalReport {
    /// Aligned text table: one column per category, then overall.
    pub fn to_text(&self) -> String {
        let mut heads: Vec<String> = self.per_category.iter().map(|s| s.category.short_label().to_string()).collect();
        heads.push("Overall".into());
        let mut ems: Vec<String> = self.per_category.iter().map(|s| format!("{:.1}", s.exact_match)).collect();
        ems.push(format!("{:.1}", self.overall));
        let mut ns: Vec<String> = self.per_category.iter().map(|s| s.n.to_string()).collect();
        ns.push(self.n.to_string());
        let mut rows = vec![("", heads), ("EM", ems), ("n", ns)];
        if self.overall_delta.is_some() {
            let mut ds: Vec<String> =
                self.per_category.iter().map(|s| s.delta.map_or("-".into(), |d| format!("{d:+.1}"))).collect();
            ds.push(self.overall_delta.map_or("-".into(), |d| format!("{d:+.1}")));
            rows.push(("Δ", ds));
        }
        let widths: Vec<usize> =
            (0..rows[0].1.len()).map(|i| rows.iter().map(|(_, r)| r[i].chars().count()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for (label, cells) in &rows {
            let _ = write!(out, "{label:<4}");
            for (c, w) in cells.iter().zip(&widths) {
                let _ = write!(out, " {c:>w$}");
            }
            out.push('\n');
        }
        if let Some(acc) = self.route_acc {
            let _ = writeln!(out, "RouteAcc {acc:.1}");
        }
        let t = &self.throughput;
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
        let _ = writeln!(
            out,
            "questions {}  runtime {:.3}s  overhead_e2e {}  qps {}",
            t.questions,
            t.total_runtime,
            opt(t.overhead_e2e),
            opt(t.qps)
        );
        let fr: Vec<String> = t.stage_fractions.iter().map(|(k, v)| format!("{k} {:.2}", v)).collect();
        let _ = writeln!(out, "stages {}", fr.join("  "));
        out
    }
}
