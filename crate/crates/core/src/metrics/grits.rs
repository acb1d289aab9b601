use super::MetricScore;
use crate::table::TableGrid;

/// Span rectangle of the anchor owning a slot, relative to that slot:
/// `(row_start, row_end, col_start, col_end)` with exclusive ends.
pub type RelRect = (i64, i64, i64, i64);

pub fn relative_rects(grid: &TableGrid) -> Vec<Vec<RelRect>> {
    (0..grid.n_rows)
        .map(|i| {
            (0..grid.n_cols)
                .map(|j| {
                    let a = grid.anchor_rect(i, j);
                    let (i, j) = (i as i64, j as i64);
                    (
                        a.row as i64 - i,
                        a.row_end() as i64 - i,
                        a.col as i64 - j,
                        a.col_end() as i64 - j,
                    )
                })
                .collect()
        })
        .collect()
}

/// Area intersection-over-union of two rectangles.
pub fn rect_iou(a: RelRect, b: RelRect) -> f64 {
    let h = (a.1.min(b.1) - a.0.max(b.0)).max(0);
    let w = (a.3.min(b.3) - a.2.max(b.2)).max(0);
    let inter = h * w;
    let area = |r: RelRect| (r.1 - r.0) * (r.3 - r.2);
    let union = area(a) + area(b) - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Maximum-weight monotone alignment of two sequences; returns the score
/// and the matched index pairs.
pub fn align(n: usize, m: usize, weight: impl Fn(usize, usize) -> f64) -> (f64, Vec<(usize, usize)>) {
    let mut dp = vec![vec![0.0f64; m + 1]; n + 1];
    for i in 1..=n {
        for j in 1..=m {
            dp[i][j] = (dp[i - 1][j - 1] + weight(i - 1, j - 1)).max(dp[i - 1][j]).max(dp[i][j - 1]);
        }
    }
    let mut pairs = Vec::new();
    let (mut i, mut j) = (n, m);
    while i > 0 && j > 0 {
        if dp[i][j] == dp[i - 1][j] {
            i -= 1;
        } else if dp[i][j] == dp[i][j - 1] {
            j -= 1;
        } else {
            pairs.push((i - 1, j - 1));
            i -= 1;
            j -= 1;
        }
    }
    pairs.reverse();
    (dp[n][m], pairs)
}

const MAX_PASSES: usize = 3;

struct Grids<'a> {
    a: &'a [Vec<RelRect>],
    b: &'a [Vec<RelRect>],
}

impl Grids<'_> {
    fn sim(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        rect_iou(self.a[i][j], self.b[k][l])
    }

    fn total(&self, rows: &[(usize, usize)], cols: &[(usize, usize)]) -> f64 {
        rows.iter().map(|&(i, k)| cols.iter().map(|&(j, l)| self.sim(i, j, k, l)).sum::<f64>()).sum()
    }

    fn rows_given(&self, cols: &[(usize, usize)]) -> Vec<(usize, usize)> {
        align(self.a.len(), self.b.len(), |i, k| cols.iter().map(|&(j, l)| self.sim(i, j, k, l)).sum()).1
    }

    fn cols_given(&self, rows: &[(usize, usize)]) -> Vec<(usize, usize)> {
        let (na, nb) = (self.a[0].len(), self.b[0].len());
        align(na, nb, |j, l| rows.iter().map(|&(i, k)| self.sim(i, j, k, l)).sum()).1
    }

    /// Independent inner alignment per row pair, then outer alignment over rows.
    fn initial_rows(&self) -> Vec<(usize, usize)> {
        let (na, nb) = (self.a[0].len(), self.b[0].len());
        align(self.a.len(), self.b.len(), |i, k| align(na, nb, |j, l| self.sim(i, j, k, l)).0).1
    }

    fn initial_cols(&self) -> Vec<(usize, usize)> {
        let (ra, rb) = (self.a.len(), self.b.len());
        align(self.a[0].len(), self.b[0].len(), |j, l| align(ra, rb, |i, k| self.sim(i, j, k, l)).0).1
    }

    /// Alternating row/column passes from a starting row alignment.
    fn refine_from_rows(&self, mut rows: Vec<(usize, usize)>) -> f64 {
        let mut best = 0.0f64;
        for _ in 0..MAX_PASSES {
            let cols = self.cols_given(&rows);
            let next = self.rows_given(&cols);
            best = best.max(self.total(&rows, &cols)).max(self.total(&next, &cols));
            if next == rows {
                break;
            }
            rows = next;
        }
        best
    }

    fn refine_from_cols(&self, mut cols: Vec<(usize, usize)>) -> f64 {
        let mut best = 0.0f64;
        for _ in 0..MAX_PASSES {
            let rows = self.rows_given(&cols);
            let next = self.cols_given(&rows);
            best = best.max(self.total(&rows, &cols)).max(self.total(&rows, &next));
            if next == cols {
                break;
            }
            cols = next;
        }
        best
    }
}

/// Best total similarity found by the factored alignment (row-first and
/// column-first passes, each iterated to a fixed point).
pub fn grits_similarity(a: &[Vec<RelRect>], b: &[Vec<RelRect>]) -> f64 {
    if a.is_empty() || b.is_empty() || a[0].is_empty() || b[0].is_empty() {
        return 0.0;
    }
    let g = Grids { a, b };
    g.refine_from_rows(g.initial_rows()).max(g.refine_from_cols(g.initial_cols()))
}

/// GriTS-top: `2·S / (|A| + |B|)` over slot span rectangles.
pub fn grits_top(pred: &TableGrid, gt: &TableGrid) -> MetricScore {
    let (na, nb) = (pred.n_rows * pred.n_cols, gt.n_rows * gt.n_cols);
    if na + nb == 0 {
        return MetricScore::value(1.0);
    }
    let s = grits_similarity(&relative_rects(pred), &relative_rects(gt));
    MetricScore::value((2.0 * s / (na + nb) as f64).clamp(0.0, 1.0))
}
