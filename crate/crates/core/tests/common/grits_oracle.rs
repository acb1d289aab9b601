//! GriTS similarity by exhaustive search over row and column subsequence pairs.

use tabrouter::metrics::{rect_iou, RelRect};

fn subsets(n: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n).map(|mask| (0..n).filter(|i| mask & (1 << i) != 0).collect()).collect()
}

pub fn brute_force_similarity(a: &[Vec<RelRect>], b: &[Vec<RelRect>]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let (ra, rb, ca, cb) = (a.len(), b.len(), a[0].len(), b[0].len());
    let mut best = 0.0f64;
    for rows_a in subsets(ra) {
        for rows_b in subsets(rb).into_iter().filter(|s| s.len() == rows_a.len()) {
            for cols_a in subsets(ca) {
                for cols_b in subsets(cb).into_iter().filter(|s| s.len() == cols_a.len()) {
                    let mut s = 0.0;
                    for (&i, &k) in rows_a.iter().zip(&rows_b) {
                        for (&j, &l) in cols_a.iter().zip(&cols_b) {
                            s += rect_iou(a[i][j], b[k][l]);
                        }
                    }
                    best = best.max(s);
                }
            }
        }
    }
    best
}
