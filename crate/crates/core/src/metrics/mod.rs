//! Table structure recognition metrics: TEDS / S-TEDS, adjacency F1 and GriTS-top.

mod adjacency;
mod grits;
mod tree;

use serde::{Deserialize, Serialize};

pub use adjacency::{adjacency_edges, adjacency_f1, AdjacencyEdge, Direction};
pub use grits::{align, grits_similarity, grits_top, rect_iou, relative_rects, RelRect};
pub use tree::{
    levenshtein, rename_cost, teds, teds_trees_exact, tree_edit_distance, CostModel, NodeLabel, TableTree,
};

use crate::table::{parse_table, sanitize_html, TableGrid};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricScore {
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recall: Option<f64>,
}

impl MetricScore {
    pub fn value(value: f64) -> Self {
        MetricScore { value, precision: None, recall: None }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("ground-truth HTML contains no table")]
    EmptyGroundTruth,
}

/// Grid of an HTML string; anything unparseable becomes the empty grid.
pub fn grid_of(html: &str) -> TableGrid {
    sanitize_html(html).and_then(|h| parse_table(&h)).unwrap_or_default()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TsrScores {
    pub teds: f64,
    pub s_teds: f64,
    pub adj_precision: f64,
    pub adj_recall: f64,
    pub adj_f1: f64,
    pub grits_top: f64,
}

impl TsrScores {
    pub const COLUMNS: [&'static str; 6] = ["teds", "s_teds", "adj_precision", "adj_recall", "adj_f1", "grits_top"];

    pub fn values(&self) -> [f64; 6] {
        [self.teds, self.s_teds, self.adj_precision, self.adj_recall, self.adj_f1, self.grits_top]
    }

    /// Column-wise mean; `None` for an empty slice.
    pub fn mean(all: &[TsrScores]) -> Option<TsrScores> {
        if all.is_empty() {
            return None;
        }
        let n = all.len() as f64;
        let avg = |f: fn(&TsrScores) -> f64| all.iter().map(f).sum::<f64>() / n;
        Some(TsrScores {
            teds: avg(|s| s.teds),
            s_teds: avg(|s| s.s_teds),
            adj_precision: avg(|s| s.adj_precision),
            adj_recall: avg(|s| s.adj_recall),
            adj_f1: avg(|s| s.adj_f1),
            grits_top: avg(|s| s.grits_top),
        })
    }
}

/// All four metrics for one predicted/ground-truth pair.
pub fn score_pair(pred_html: &str, gt_html: &str) -> Result<TsrScores, MetricError> {
    let t = teds(pred_html, gt_html, false)?;
    let s = teds(pred_html, gt_html, true)?;
    let (pg, gg) = (grid_of(pred_html), grid_of(gt_html));
    let adj = adjacency_f1(&pg, &gg);
    Ok(TsrScores {
        teds: t.value,
        s_teds: s.value,
        adj_precision: adj.precision.unwrap_or(0.0),
        adj_recall: adj.recall.unwrap_or(0.0),
        adj_f1: adj.value,
        grits_top: grits_top(&pg, &gg).value,
    })
}
