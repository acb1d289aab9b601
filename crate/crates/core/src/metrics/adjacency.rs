use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::MetricScore;
use crate::table::TableGrid;
use crate::text::collapse_whitespace;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Right,
    Down,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AdjacencyEdge {
    pub from_text: String,
    pub to_text: String,
    pub direction: Direction,
}

/// Right and down edges between distinct anchors. For each anchor, the
/// neighbour is the owner of the slot just past its span edge; each anchor
/// pair contributes one edge per direction. Empty cells take part.
pub fn adjacency_edges(grid: &TableGrid) -> Vec<AdjacencyEdge> {
    let mut pairs: BTreeSet<((usize, usize), (usize, usize), Direction)> = BTreeSet::new();
    for rect in grid.anchors() {
        let from = (rect.row, rect.col);
        if rect.col_end() < grid.n_cols {
            for r in rect.row..rect.row_end() {
                pairs.insert((from, grid.owner(r, rect.col_end()), Direction::Right));
            }
        }
        if rect.row_end() < grid.n_rows {
            for c in rect.col..rect.col_end() {
                pairs.insert((from, grid.owner(rect.row_end(), c), Direction::Down));
            }
        }
    }
    let text = |(r, c): (usize, usize)| collapse_whitespace(&grid.slot(r, c).text);
    pairs
        .into_iter()
        .map(|(a, b, direction)| AdjacencyEdge { from_text: text(a), to_text: text(b), direction })
        .collect()
}

fn multiset(edges: Vec<AdjacencyEdge>) -> HashMap<AdjacencyEdge, usize> {
    let mut m = HashMap::new();
    for e in edges {
        *m.entry(e).or_insert(0) += 1;
    }
    m
}

/// Precision/recall/F1 over text-keyed edge multisets.
pub fn adjacency_f1(pred: &TableGrid, gt: &TableGrid) -> MetricScore {
    let (p, g) = (multiset(adjacency_edges(pred)), multiset(adjacency_edges(gt)));
    let (np, ng): (usize, usize) = (p.values().sum(), g.values().sum());
    let common: usize = p.iter().map(|(e, &k)| k.min(g.get(e).copied().unwrap_or(0))).sum();
    let precision = if np == 0 { 1.0 } else { common as f64 / np as f64 };
    let recall = if ng == 0 { 1.0 } else { common as f64 / ng as f64 };
    let f1 = if np == 0 && ng == 0 {
        1.0
    } else if precision + recall == 0.0 || np == 0 || ng == 0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    MetricScore { value: f1, precision: Some(precision), recall: Some(recall) }
}
