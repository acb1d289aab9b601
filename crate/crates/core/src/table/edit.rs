//! Structural edits used by the annotation service. Every edit is pure: it
//! returns a new grid or an error and never touches the input.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::grid::{SpanRect, TableGrid};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op")]
pub enum EditOp {
    SetCellText { r: usize, c: usize, text: String },
    InsertRow { at: usize },
    DeleteRow { at: usize },
    DuplicateRow { at: usize },
    MergeCells { r1: usize, c1: usize, r2: usize, c2: usize },
    SplitCell { r: usize, c: usize },
    SetHeaderRowCount { n: usize },
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum EditError {
    #[error("out of bounds: {0}")]
    OutOfBounds(String),
    #[error("span conflict: {0}")]
    SpanConflict(String),
    #[error("edit would break the grid: {0}")]
    InvalidGrid(String),
}

impl EditError {
    pub fn code(&self) -> &'static str {
        match self {
            EditError::OutOfBounds(_) => "OutOfBounds",
            EditError::SpanConflict(_) => "SpanConflict",
            EditError::InvalidGrid(_) => "InvalidGrid",
        }
    }
}

fn anchors_with_text(grid: &TableGrid) -> Vec<(SpanRect, String)> {
    grid.anchors()
        .map(|a| (a, grid.slot(a.row, a.col).text.clone()))
        .collect()
}

fn check_slot(grid: &TableGrid, r: usize, c: usize) -> Result<(), EditError> {
    if r >= grid.n_rows || c >= grid.n_cols {
        return Err(EditError::OutOfBounds(format!(
            "cell ({r}, {c}) outside {}x{} grid",
            grid.n_rows, grid.n_cols
        )));
    }
    Ok(())
}

pub fn apply_edit(grid: &TableGrid, op: &EditOp) -> Result<TableGrid, EditError> {
    let mut anchors = anchors_with_text(grid);
    let mut n_rows = grid.n_rows;
    let mut n_cols = grid.n_cols;
    let mut header = grid.header_row_count;

    match op {
        EditOp::SetCellText { r, c, text } => {
            check_slot(grid, *r, *c)?;
            let owner = grid.owner(*r, *c);
            for (a, t) in anchors.iter_mut() {
                if (a.row, a.col) == owner {
                    *t = text.trim().to_string();
                }
            }
        }
        EditOp::InsertRow { at } => {
            let at = *at;
            if at > n_rows {
                return Err(EditError::OutOfBounds(format!("row {at} > {n_rows}")));
            }
            if n_cols == 0 {
                n_cols = 1;
            }
            for (a, _) in anchors.iter_mut() {
                if a.row >= at {
                    a.row += 1;
                } else if a.row_end() > at {
                    a.rowspan += 1;
                }
            }
            if at < header {
                header += 1;
            }
            n_rows += 1;
        }
        EditOp::DeleteRow { at } => {
            let at = *at;
            if at >= n_rows {
                return Err(EditError::OutOfBounds(format!("row {at} >= {n_rows}")));
            }
            anchors.retain_mut(|(a, _)| {
                if a.row > at {
                    a.row -= 1;
                    true
                } else if a.row_end() > at {
                    a.rowspan -= 1;
                    a.rowspan > 0
                } else {
                    true
                }
            });
            if at < header {
                header -= 1;
            }
            n_rows -= 1;
            if n_rows == 0 {
                n_cols = 0;
            }
        }
        EditOp::DuplicateRow { at } => {
            let at = *at;
            if at >= n_rows {
                return Err(EditError::OutOfBounds(format!("row {at} >= {n_rows}")));
            }
            let mut copies = Vec::new();
            for (a, t) in anchors.iter_mut() {
                if a.row > at {
                    a.row += 1;
                } else if a.row_end() - 1 > at {
                    a.rowspan += 1;
                } else if a.row_end() - 1 == at {
                    copies.push((SpanRect { row: at + 1, col: a.col, rowspan: 1, colspan: a.colspan }, t.clone()));
                }
            }
            anchors.extend(copies);
            if at < header {
                header += 1;
            }
            n_rows += 1;
        }
        EditOp::MergeCells { r1, c1, r2, c2 } => {
            let (top, bottom) = (*r1.min(r2), *r1.max(r2));
            let (left, right) = (*c1.min(c2), *c1.max(c2));
            check_slot(grid, bottom, right)?;
            let mut texts = Vec::new();
            for r in top..=bottom {
                for c in left..=right {
                    let rect = grid.anchor_rect(r, c);
                    if rect.rowspan > 1 || rect.colspan > 1 {
                        return Err(EditError::SpanConflict(format!(
                            "cell ({r}, {c}) already belongs to the span anchored at ({}, {})",
                            rect.row, rect.col
                        )));
                    }
                    let t = &grid.slot(r, c).text;
                    if !t.is_empty() {
                        texts.push(t.clone());
                    }
                }
            }
            anchors.retain(|(a, _)| !(a.row >= top && a.row <= bottom && a.col >= left && a.col <= right));
            anchors.push((
                SpanRect { row: top, col: left, rowspan: bottom - top + 1, colspan: right - left + 1 },
                texts.join(" "),
            ));
        }
        EditOp::SplitCell { r, c } => {
            check_slot(grid, *r, *c)?;
            let owner = grid.owner(*r, *c);
            for (a, _) in anchors.iter_mut() {
                if (a.row, a.col) == owner {
                    a.rowspan = 1;
                    a.colspan = 1;
                }
            }
        }
        EditOp::SetHeaderRowCount { n } => {
            if *n > n_rows {
                return Err(EditError::OutOfBounds(format!("header rows {n} > {n_rows}")));
            }
            header = *n;
        }
    }

    let out = TableGrid::from_anchors(n_rows, n_cols, header, anchors);
    out.check_invariants().map_err(EditError::InvalidGrid)?;
    Ok(out)
}
