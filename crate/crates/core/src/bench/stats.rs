use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::category::QuestionCategory;
use crate::metrics::grid_of;
use crate::sample::Sample;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub tables: usize,
    pub questions: usize,
    pub median_rows: f64,
    pub median_cols: f64,
    /// Percent of tables with at least one spanning cell.
    pub spanning_prevalence: f64,
    /// Percent of tables with more than three spanning cells.
    pub many_spans_prevalence: f64,
    pub categories: BTreeMap<QuestionCategory, usize>,
}

/// Median of a list; the mean of the two middle values for even lengths.
pub fn median(values: &[usize]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_unstable();
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m] as f64
    } else {
        (v[m - 1] + v[m]) as f64 / 2.0
    }
}

pub fn corpus_stats(samples: &[Sample]) -> CorpusStats {
    let grids: Vec<_> = samples.iter().map(|s| grid_of(&s.gt_html)).collect();
    let rows: Vec<usize> = grids.iter().map(|g| g.n_rows).collect();
    let cols: Vec<usize> = grids.iter().map(|g| g.n_cols).collect();
    let spans: Vec<usize> = grids.iter().map(|g| g.spanning_cell_count()).collect();
    let pct = |k: usize| if samples.is_empty() { 0.0 } else { 100.0 * k as f64 / samples.len() as f64 };
    let mut categories = BTreeMap::new();
    for q in samples.iter().flat_map(|s| &s.questions) {
        *categories.entry(q.gold_category).or_insert(0) += 1;
    }
    CorpusStats {
        tables: samples.len(),
        questions: samples.iter().map(|s| s.questions.len()).sum(),
        median_rows: median(&rows),
        median_cols: median(&cols),
        spanning_prevalence: pct(spans.iter().filter(|&&n| n > 0).count()),
        many_spans_prevalence: pct(spans.iter().filter(|&&n| n > 3).count()),
        categories,
    }
}

impl CorpusStats {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "tables {}  questions {}", self.tables, self.questions);
        let _ = writeln!(out, "median rows {:.1}  median cols {:.1}", self.median_rows, self.median_cols);
        let _ = writeln!(
            out,
            "spanning cells: {:.2}% of tables (>3: {:.2}%)",
            self.spanning_prevalence, self.many_spans_prevalence
        );
        for (c, n) in &self.categories {
            let _ = writeln!(out, "  {:<28} {n}", c.as_str());
        }
        out
    }
}
