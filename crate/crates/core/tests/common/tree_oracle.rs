//! Exhaustive ordered-tree edit distance: minimum over all valid mappings.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use tabrouter::metrics::{rename_cost, CostModel, TableTree};

fn ancestors(t: &TableTree) -> Vec<Vec<bool>> {
    let n = t.len();
    let mut anc = vec![vec![false; n]; n];
    fn mark(t: &TableTree, node: usize, stack: &mut Vec<usize>, anc: &mut Vec<Vec<bool>>) {
        for &a in stack.iter() {
            anc[a][node] = true;
        }
        stack.push(node);
        for &c in &t.children[node] {
            mark(t, c, stack, anc);
        }
        stack.pop();
    }
    if n > 0 {
        mark(t, 0, &mut Vec::new(), &mut anc);
    }
    anc
}

/// Preorder position of every node (children lists are in preorder already
/// when trees are built with `push`, but compute it to be safe).
fn preorder(t: &TableTree) -> Vec<usize> {
    let mut order = Vec::new();
    fn walk(t: &TableTree, n: usize, out: &mut Vec<usize>) {
        out.push(n);
        for &c in &t.children[n] {
            walk(t, c, out);
        }
    }
    if !t.is_empty() {
        walk(t, 0, &mut order);
    }
    order
}

pub fn brute_force_distance(a: &TableTree, b: &TableTree, model: CostModel) -> BigRational {
    let (oa, ob) = (preorder(a), preorder(b));
    let (anc_a, anc_b) = (ancestors(a), ancestors(b));
    let mut best: Option<BigRational> = None;
    let mut mapping: Vec<(usize, usize)> = Vec::new();

    #[allow(clippy::too_many_arguments)]
    fn search(
        k: usize,
        next_j: usize,
        oa: &[usize],
        ob: &[usize],
        anc_a: &[Vec<bool>],
        anc_b: &[Vec<bool>],
        a: &TableTree,
        b: &TableTree,
        model: CostModel,
        mapping: &mut Vec<(usize, usize)>,
        cost: BigRational,
        best: &mut Option<BigRational>,
    ) {
        if k == oa.len() {
            let unmapped = BigInt::from(oa.len() + ob.len() - 2 * mapping.len());
            let total = cost + BigRational::from_integer(unmapped);
            if best.as_ref().is_none_or(|b| total < *b) {
                *best = Some(total);
            }
            return;
        }
        let i = oa[k];
        search(k + 1, next_j, oa, ob, anc_a, anc_b, a, b, model, mapping, cost.clone(), best);
        for (pos, &j) in ob.iter().enumerate().skip(next_j) {
            let ok = mapping.iter().all(|&(i2, j2)| anc_a[i2][i] == anc_b[j2][j] && anc_a[i][i2] == anc_b[j][j2]);
            if !ok {
                continue;
            }
            mapping.push((i, j));
            let c = &cost + rename_cost(&a.labels[i], &b.labels[j], model);
            search(k + 1, pos + 1, oa, ob, anc_a, anc_b, a, b, model, mapping, c, best);
            mapping.pop();
        }
    }

    search(0, 0, &oa, &ob, &anc_a, &anc_b, a, b, model, &mut mapping, BigRational::zero(), &mut best);
    best.unwrap_or_else(BigRational::zero)
}
