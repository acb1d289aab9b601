//! Seeded generators for grids, trees and programs.

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use tabrouter::metrics::{NodeLabel, TableTree};
use tabrouter::dsl::{ArgmaxReturn, LookupMode, Op, Program, RowPick, SortOrder};
use tabrouter::table::{RowRole, SpanRect, TableGrid, TableJson};

const WORDS: &[&str] = &["Dent", "Acte", "Honoraires", "36", "Détartrage", "40,00", "", "Total", "Couronne", "a b"];

/// Every partition of an `rows × cols` grid into rectangles.
pub fn all_layouts(rows: usize, cols: usize) -> Vec<Vec<SpanRect>> {
    fn go(rows: usize, cols: usize, used: &mut Vec<Vec<bool>>, acc: &mut Vec<SpanRect>, out: &mut Vec<Vec<SpanRect>>) {
        let Some((r, c)) = (0..rows).flat_map(|r| (0..cols).map(move |c| (r, c))).find(|&(r, c)| !used[r][c]) else {
            out.push(acc.clone());
            return;
        };
        for h in 1..=rows - r {
            for w in 1..=cols - c {
                let free = (r..r + h).all(|i| (c..c + w).all(|j| !used[i][j]));
                if !free {
                    continue;
                }
                for i in r..r + h {
                    for j in c..c + w {
                        used[i][j] = true;
                    }
                }
                acc.push(SpanRect { row: r, col: c, rowspan: h, colspan: w });
                go(rows, cols, used, acc, out);
                acc.pop();
                for i in r..r + h {
                    for j in c..c + w {
                        used[i][j] = false;
                    }
                }
            }
        }
    }
    let mut out = Vec::new();
    go(rows, cols, &mut vec![vec![false; cols]; rows], &mut Vec::new(), &mut out);
    out
}

pub fn grid_from_layout(rows: usize, cols: usize, layout: &[SpanRect]) -> TableGrid {
    TableGrid::from_anchors(rows, cols, 0, layout.iter().enumerate().map(|(k, r)| (*r, format!("c{k}"))))
}

/// Random grid up to 6×5 with random spans and texts.
pub fn random_grid(rng: &mut impl RngCore) -> TableGrid {
    let rows = rng.gen_range(1..=6);
    let cols = rng.gen_range(1..=5);
    let mut used = vec![vec![false; cols]; rows];
    let mut anchors = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if used[r][c] {
                continue;
            }
            let (mut h, mut w) = (1, 1);
            if rng.gen_bool(0.25) {
                let max_w = (c..cols).take_while(|&j| !used[r][j]).count();
                w = rng.gen_range(1..=max_w);
                h = rng.gen_range(1..=(rows - r).min(3));
                while !(r..r + h).all(|i| (c..c + w).all(|j| !used[i][j])) {
                    h -= 1;
                }
            }
            for i in r..r + h {
                for j in c..c + w {
                    used[i][j] = true;
                }
            }
            let text = WORDS.choose(rng).unwrap().to_string();
            anchors.push((SpanRect { row: r, col: c, rowspan: h, colspan: w }, text));
        }
    }
    TableGrid::from_anchors(rows, cols, 0, anchors)
}

/// Same structure, different cell texts.
pub fn retext(grid: &TableGrid, rng: &mut impl RngCore) -> TableGrid {
    let anchors: Vec<_> = grid.anchors().map(|a| (a, format!("x{}", rng.gen_range(0..1000)))).collect();
    TableGrid::from_anchors(grid.n_rows, grid.n_cols, grid.header_row_count, anchors)
}

const TAGS: &[&str] = &["table", "tbody", "tr", "td"];

/// Random ordered tree with `1..=max_nodes` nodes and small label alphabets
/// so renames of every cost kind occur.
pub fn random_tree(rng: &mut impl RngCore, max_nodes: usize) -> TableTree {
    let n = rng.gen_range(1..=max_nodes);
    let label = |rng: &mut dyn RngCore| {
        let tag = *TAGS.choose(rng).unwrap();
        if tag == "td" {
            let texts = ["", "a", "ab", "ba", "abc"];
            NodeLabel::td(texts.choose(rng).unwrap(), rng.gen_range(1..=2), 1)
        } else {
            NodeLabel::element(tag)
        }
    };
    let mut t = TableTree::leaf(label(rng));
    // Attach each new node to a node on the rightmost path so indices stay in preorder.
    let mut path = vec![0usize];
    for _ in 1..n {
        let depth = rng.gen_range(0..path.len());
        path.truncate(depth + 1);
        let parent = path[depth];
        let l = label(rng);
        let id = t.push(parent, l);
        path.push(id);
    }
    t
}


fn random_header(rng: &mut impl RngCore, t: &TableJson) -> String {
    if rng.gen_bool(0.03) {
        "honoraires".to_string()
    } else {
        t.headers.choose(rng).unwrap().clone()
    }
}

fn random_value(rng: &mut impl RngCore, t: &TableJson, col: &str) -> String {
    let c = t.headers.iter().position(|h| h == col);
    match (c, t.rows.choose(rng)) {
        (Some(c), Some(row)) if rng.gen_bool(0.85) => row.cells[c].clone(),
        _ => "introuvable".to_string(),
    }
}

fn random_roles(rng: &mut impl RngCore) -> Vec<RowRole> {
    [RowRole::Data, RowRole::Subtotal, RowRole::Total].into_iter().filter(|_| rng.gen_bool(0.5)).collect()
}

fn random_terminal(rng: &mut impl RngCore, t: &TableJson, depth: usize) -> Op {
    let kinds = if depth == 0 { 6 } else { 5 };
    match rng.gen_range(0..kinds) {
        0 => Op::Sum { col: random_header(rng, t) },
        1 => {
            let col = random_header(rng, t);
            let value = rng.gen_bool(0.5).then(|| random_value(rng, t, &col));
            Op::Count { col, value }
        }
        2 => Op::KthRow {
            k: if rng.gen_bool(0.3) { RowPick::Last } else { RowPick::Nth(rng.gen_range(0..8)) },
            target_col: random_header(rng, t),
            data_only: rng.gen_bool(0.5),
        },
        3 => {
            let key_col = random_header(rng, t);
            let key_value = random_value(rng, t, &key_col);
            Op::Lookup {
                key_col,
                key_value,
                target_col: random_header(rng, t),
                mode: if depth > 0 || rng.gen_bool(0.5) { LookupMode::First } else { LookupMode::All },
                empty_to_na: rng.gen_bool(0.5),
            }
        }
        4 if depth == 0 => Op::Argmax {
            col: random_header(rng, t),
            ret: if rng.gen_bool(0.5) { ArgmaxReturn::RowIndex } else { ArgmaxReturn::Column(random_header(rng, t)) },
            all_ties: rng.gen_bool(0.5),
        },
        _ if depth == 0 => Op::Diff {
            a: Box::new(random_terminal(rng, t, 1)),
            b: Box::new(random_terminal(rng, t, 1)),
        },
        _ => Op::Sum { col: random_header(rng, t) },
    }
}

/// Random program over `t`: up to three context ops and one terminal, with
/// occasional misplaced terminals and unknown headers.
pub fn random_program(rng: &mut impl RngCore, t: &TableJson, qid: usize) -> Program {
    let mut ops = Vec::new();
    for _ in 0..rng.gen_range(0..=3) {
        ops.push(match rng.gen_range(0..4) {
            0 => Op::ExcludeRoles { roles: random_roles(rng) },
            1 => Op::KeepRoles { roles: random_roles(rng) },
            2 => {
                let col = random_header(rng, t);
                let value = random_value(rng, t, &col);
                Op::FilterEq { col, value }
            }
            _ => Op::Sort {
                col: random_header(rng, t),
                order: if rng.gen_bool(0.5) { SortOrder::Asc } else { SortOrder::Desc },
                numeric: rng.gen_bool(0.5),
            },
        });
    }
    let term = random_terminal(rng, t, 0);
    if rng.gen_bool(0.05) && !ops.is_empty() {
        ops.insert(0, term);
    } else {
        ops.push(term);
    }
    Program::new(qid, ops)
}
