use serde::{Deserialize, Serialize};

use super::html::{escape_text, parse_raw, RawTable, SectionKind};
use super::TableError;

/// One position of the dense grid.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellSlot {
    pub text: String,
    pub anchor: bool,
    pub rowspan: usize,
    pub colspan: usize,
    /// Anchor coordinate `(row, col)` for covered slots.
    pub covered_by: Option<(usize, usize)>,
}

impl CellSlot {
    pub fn empty_anchor() -> Self {
        CellSlot {
            text: String::new(),
            anchor: true,
            rowspan: 1,
            colspan: 1,
            covered_by: None,
        }
    }

    fn covered(by: (usize, usize), text: String) -> Self {
        CellSlot {
            text,
            anchor: false,
            rowspan: 1,
            colspan: 1,
            covered_by: Some(by),
        }
    }
}

/// Rectangular cell matrix with merged-cell anchors.
///
/// Row-covered slots (directly below an anchor) repeat the anchor text so key
/// columns stay matchable; column-covered slots are empty so amounts are not
/// counted twice.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableGrid {
    pub n_rows: usize,
    pub n_cols: usize,
    pub cells: Vec<Vec<CellSlot>>,
    pub header_row_count: usize,
}

/// A span rectangle, end-exclusive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SpanRect {
    pub row: usize,
    pub col: usize,
    pub rowspan: usize,
    pub colspan: usize,
}

impl SpanRect {
    pub fn row_end(&self) -> usize {
        self.row + self.rowspan
    }
    pub fn col_end(&self) -> usize {
        self.col + self.colspan
    }
    pub fn contains(&self, r: usize, c: usize) -> bool {
        r >= self.row && r < self.row_end() && c >= self.col && c < self.col_end()
    }
}

impl TableGrid {
    pub fn slot(&self, r: usize, c: usize) -> &CellSlot {
        &self.cells[r][c]
    }

    /// Coordinate of the anchor owning slot `(r, c)`.
    pub fn owner(&self, r: usize, c: usize) -> (usize, usize) {
        self.cells[r][c].covered_by.unwrap_or((r, c))
    }

    pub fn anchor_rect(&self, r: usize, c: usize) -> SpanRect {
        let (ar, ac) = self.owner(r, c);
        let a = &self.cells[ar][ac];
        SpanRect { row: ar, col: ac, rowspan: a.rowspan, colspan: a.colspan }
    }

    /// All anchors in row-major order.
    pub fn anchors(&self) -> impl Iterator<Item = SpanRect> + '_ {
        (0..self.n_rows).flat_map(move |r| {
            (0..self.n_cols).filter_map(move |c| {
                let s = &self.cells[r][c];
                s.anchor.then_some(SpanRect { row: r, col: c, rowspan: s.rowspan, colspan: s.colspan })
            })
        })
    }

    pub fn spanning_cell_count(&self) -> usize {
        self.anchors().filter(|a| a.rowspan > 1 || a.colspan > 1).count()
    }

    pub fn row_texts(&self, r: usize) -> impl Iterator<Item = &str> {
        self.cells[r].iter().map(|s| s.text.as_str())
    }

    /// Builds a grid from anchor rectangles and their texts, filling covered
    /// slots. Gaps become empty anchors.
    pub fn from_anchors(
        n_rows: usize,
        n_cols: usize,
        header_row_count: usize,
        anchors: impl IntoIterator<Item = (SpanRect, String)>,
    ) -> TableGrid {
        let mut cells = vec![vec![CellSlot::empty_anchor(); n_cols]; n_rows];
        for (rect, text) in anchors {
            for r in rect.row..rect.row_end() {
                for c in rect.col..rect.col_end() {
                    cells[r][c] = if (r, c) == (rect.row, rect.col) {
                        CellSlot {
                            text: text.clone(),
                            anchor: true,
                            rowspan: rect.rowspan,
                            colspan: rect.colspan,
                            covered_by: None,
                        }
                    } else if c == rect.col {
                        CellSlot::covered((rect.row, rect.col), text.clone())
                    } else {
                        CellSlot::covered((rect.row, rect.col), String::new())
                    };
                }
            }
        }
        TableGrid { n_rows, n_cols, cells, header_row_count }
    }

    /// Checks every structural invariant; returns a description of the first violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.cells.len() != self.n_rows {
            return Err(format!("expected {} rows, found {}", self.n_rows, self.cells.len()));
        }
        if self.header_row_count > self.n_rows {
            return Err("header_row_count exceeds row count".into());
        }
        for (r, row) in self.cells.iter().enumerate() {
            if row.len() != self.n_cols {
                return Err(format!("row {r} has {} slots, expected {}", row.len(), self.n_cols));
            }
        }
        let mut owner = vec![vec![None::<(usize, usize)>; self.n_cols]; self.n_rows];
        for a in self.anchors().collect::<Vec<_>>() {
            if a.rowspan == 0 || a.colspan == 0 {
                return Err(format!("anchor ({}, {}) has a zero span", a.row, a.col));
            }
            if a.row_end() > self.n_rows || a.col_end() > self.n_cols {
                return Err(format!("span of ({}, {}) exceeds grid bounds", a.row, a.col));
            }
            let text = &self.cells[a.row][a.col].text;
            for r in a.row..a.row_end() {
                for c in a.col..a.col_end() {
                    if owner[r][c].is_some() {
                        return Err(format!("slot ({r}, {c}) is claimed by two spans"));
                    }
                    owner[r][c] = Some((a.row, a.col));
                    if (r, c) == (a.row, a.col) {
                        continue;
                    }
                    let s = &self.cells[r][c];
                    if s.anchor || s.covered_by != Some((a.row, a.col)) || s.rowspan != 1 || s.colspan != 1 {
                        return Err(format!("slot ({r}, {c}) is not covered by ({}, {})", a.row, a.col));
                    }
                    let expected = if c == a.col { text.as_str() } else { "" };
                    if s.text != expected {
                        return Err(format!("covered slot ({r}, {c}) has inconsistent text"));
                    }
                }
            }
        }
        for (r, row) in owner.iter().enumerate() {
            for (c, o) in row.iter().enumerate() {
                if o.is_none() {
                    return Err(format!("slot ({r}, {c}) belongs to no anchor"));
                }
            }
        }
        Ok(())
    }

    /// Canonical HTML: thead with the header rows (present, possibly empty, whenever
    /// the grid has rows), tbody with the rest, spans as attributes.
    pub fn to_html(&self) -> String {
        let mut out = String::from("<table>");
        if self.n_rows == 0 {
            out.push_str("</table>");
            return out;
        }
        let emit_rows = |out: &mut String, range: std::ops::Range<usize>| {
            for r in range {
                out.push_str("<tr>");
                for c in 0..self.n_cols {
                    let s = &self.cells[r][c];
                    if !s.anchor {
                        continue;
                    }
                    out.push_str("<td");
                    if s.colspan > 1 {
                        out.push_str(&format!(" colspan=\"{}\"", s.colspan));
                    }
                    if s.rowspan > 1 {
                        out.push_str(&format!(" rowspan=\"{}\"", s.rowspan));
                    }
                    out.push('>');
                    out.push_str(&escape_text(&s.text));
                    out.push_str("</td>");
                }
                out.push_str("</tr>");
            }
        };
        out.push_str("<thead>");
        emit_rows(&mut out, 0..self.header_row_count);
        out.push_str("</thead>");
        if self.header_row_count < self.n_rows {
            out.push_str("<tbody>");
            emit_rows(&mut out, self.header_row_count..self.n_rows);
            out.push_str("</tbody>");
        }
        out.push_str("</table>");
        out
    }
}

/// Expands spans of a raw table into a rectangular grid.
pub fn grid_from_raw(raw: &RawTable) -> TableGrid {
    let rows: Vec<_> = raw.rows().collect();
    let n_rows = rows.len();

    let header_row_count = if raw.sections.iter().any(|s| s.kind == SectionKind::Thead) {
        raw.sections
            .iter()
            .take_while(|s| s.kind == SectionKind::Thead)
            .map(|s| s.rows.len())
            .sum()
    } else {
        usize::from(n_rows > 0)
    };

    // occupied[r][c] is true once some span claims the slot.
    let mut occupied: Vec<Vec<bool>> = vec![Vec::new(); n_rows];
    let mut placed: Vec<(SpanRect, String)> = Vec::new();
    let mut n_cols = 0;
    for (r, (_, cells)) in rows.iter().enumerate() {
        let mut col = 0;
        for cell in cells.iter() {
            while occupied[r].get(col).copied().unwrap_or(false) {
                col += 1;
            }
            let rowspan = cell.rowspan.min(n_rows - r);
            // Clip the colspan before any slot already claimed from above.
            let mut colspan = 0;
            while colspan < cell.colspan && !occupied[r].get(col + colspan).copied().unwrap_or(false) {
                colspan += 1;
            }
            for rr in r..r + rowspan {
                let row = &mut occupied[rr];
                if row.len() < col + colspan {
                    row.resize(col + colspan, false);
                }
                for flag in &mut row[col..col + colspan] {
                    *flag = true;
                }
            }
            placed.push((SpanRect { row: r, col, rowspan, colspan }, cell.text.clone()));
            col += colspan;
            n_cols = n_cols.max(col);
        }
        n_cols = n_cols.max(occupied[r].len());
    }
    TableGrid::from_anchors(n_rows, n_cols, header_row_count, placed)
}

/// Parses a sanitized table fragment into a grid.
pub fn parse_table(html: &str) -> Result<TableGrid, TableError> {
    Ok(grid_from_raw(&parse_raw(html)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::sanitize_html;
    use proptest::prelude::*;

    #[test]
    fn colspan_covers_right() {
        let g = parse_table("<table><tr><td colspan=\"2\">T</td></tr><tr><td>a</td><td>b</td></tr></table>").unwrap();
        assert_eq!((g.n_rows, g.n_cols), (2, 2));
        assert_eq!(g.slot(0, 1).covered_by, Some((0, 0)));
        assert_eq!(g.slot(0, 1).text, "");
        assert_eq!(g.slot(0, 0).colspan, 2);
        g.check_invariants().unwrap();
    }

    #[test]
    fn rowspan_replicates_text() {
        let g = parse_table("<table><tr><td rowspan=\"2\">k</td><td>1</td></tr><tr><td>2</td></tr></table>").unwrap();
        assert_eq!((g.n_rows, g.n_cols), (2, 2));
        assert_eq!(g.slot(1, 0).covered_by, Some((0, 0)));
        assert_eq!(g.slot(1, 0).text, "k");
        assert_eq!(g.slot(1, 1).text, "2");
        g.check_invariants().unwrap();
    }

    #[test]
    fn empty_table() {
        let g = parse_table("<table></table>").unwrap();
        assert_eq!((g.n_rows, g.n_cols, g.header_row_count), (0, 0, 0));
    }

    #[test]
    fn ragged_rows_padded_and_spans_clipped() {
        let g = parse_table("<table><tr><td>a</td><td>b</td><td>c</td></tr><tr><td rowspan=\"5\">d</td></tr></table>").unwrap();
        assert_eq!((g.n_rows, g.n_cols), (2, 3));
        assert_eq!(g.slot(1, 0).rowspan, 1);
        assert!(g.slot(1, 2).anchor);
        g.check_invariants().unwrap();
    }

    #[test]
    fn colliding_colspan_is_clipped() {
        let g = parse_table(
            "<table><tr><td>a</td><td rowspan=\"2\">b</td></tr><tr><td colspan=\"2\">c</td><td>d</td></tr></table>",
        )
        .unwrap();
        g.check_invariants().unwrap();
        assert_eq!(g.slot(1, 0).colspan, 1);
        assert_eq!(g.slot(1, 2).text, "d");
    }

    #[test]
    fn header_rows_from_thead() {
        let g = parse_table("<table><thead><tr><td>A</td></tr><tr><td>B</td></tr></thead><tbody><tr><td>1</td></tr></tbody></table>").unwrap();
        assert_eq!(g.header_row_count, 2);
        let g = parse_table("<table><tr><td>A</td></tr><tr><td>1</td></tr></table>").unwrap();
        assert_eq!(g.header_row_count, 1);
        let g = parse_table("<table><thead></thead><tbody><tr><td>1</td></tr></tbody></table>").unwrap();
        assert_eq!(g.header_row_count, 0);
    }

    #[test]
    fn canonical_html_round_trip() {
        let src = "<table><thead><tr><td rowspan=\"2\">Acte</td><td colspan=\"2\">Montants</td></tr><tr><td>Honoraires</td><td>Base</td></tr></thead><tbody><tr><td>x &amp; y</td><td>1</td><td>2</td></tr></tbody></table>";
        let g = parse_table(src).unwrap();
        assert_eq!(g.to_html(), src);
        assert_eq!(parse_table(&g.to_html()).unwrap(), g);
    }

    fn layout() -> impl Strategy<Value = Vec<Vec<(usize, usize, String)>>> {
        proptest::collection::vec(
            proptest::collection::vec((1usize..4, 1usize..4, "[a-c]{0,2}"), 0..5),
            0..6,
        )
    }

    fn render(rows: &[Vec<(usize, usize, String)>], thead: usize) -> String {
        let mut s = String::from("<table>");
        for (i, row) in rows.iter().enumerate() {
            if i == 0 && thead > 0 {
                s.push_str("<thead>");
            }
            if i == thead.min(rows.len()) && thead > 0 {
                s.push_str("</thead><tbody>");
            }
            s.push_str("<tr>");
            for (cs, rs, t) in row {
                s.push_str(&format!("<td colspan=\"{cs}\" rowspan=\"{rs}\">{t}</td>"));
            }
            s.push_str("</tr>");
        }
        s.push_str("</table>");
        s
    }

    proptest! {
        #[test]
        fn random_layouts_are_rectangular(rows in layout(), thead in 0usize..3) {
            let html = sanitize_html(&render(&rows, thead)).unwrap();
            let g = parse_table(&html).unwrap();
            prop_assert!(g.check_invariants().is_ok(), "{:?}", g.check_invariants());
            // Canonical HTML is a fixpoint after one pass.
            let again = parse_table(&g.to_html()).unwrap();
            prop_assert_eq!(&again, &g);
        }
    }
}
