use serde::{Deserialize, Serialize};

use super::grid::TableGrid;
use super::roles::RowRole;
use super::TableError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRow {
    /// 1-based body row index in visual order.
    pub index: usize,
    #[serde(rename = "row_role")]
    pub role: RowRole,
    pub cells: Vec<String>,
}

/// Planner-facing table: flat column headers plus body rows tagged with roles.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableJson {
    pub headers: Vec<String>,
    pub rows: Vec<TableRow>,
}

impl TableJson {
    pub fn empty() -> Self {
        TableJson::default()
    }

    pub fn column(&self, header: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == header)
    }

    pub fn row(&self, index: usize) -> Option<&TableRow> {
        index.checked_sub(1).and_then(|i| self.rows.get(i))
    }

    pub fn cell(&self, index: usize, header: &str) -> Option<&str> {
        let col = self.column(header)?;
        self.row(index).map(|r| r.cells[col].as_str())
    }

    /// Compact JSON used in prompts.
    pub fn to_prompt_json(&self) -> String {
        serde_json::to_string(self).expect("TableJson serializes")
    }
}

/// Flattens the header rows and emits body rows with their roles.
///
/// Each column header joins the distinct non-empty header texts of that column,
/// top to bottom, with `" | "`. Header spans contribute their text to every
/// column they cover, so a group header prefixes each of its sub-columns.
pub fn to_table_json(grid: &TableGrid, roles: &[RowRole]) -> Result<TableJson, TableError> {
    if grid.n_rows == 0 {
        return Err(TableError::EmptyTable);
    }
    let headers = (0..grid.n_cols)
        .map(|c| {
            let mut parts: Vec<&str> = Vec::new();
            for r in 0..grid.header_row_count {
                let (ar, ac) = grid.owner(r, c);
                let text = grid.slot(ar, ac).text.as_str();
                if !text.is_empty() && !parts.contains(&text) {
                    parts.push(text);
                }
            }
            parts.join(" | ")
        })
        .collect();
    let rows = (grid.header_row_count..grid.n_rows)
        .enumerate()
        .map(|(i, r)| TableRow {
            index: i + 1,
            role: match roles.get(r) {
                Some(RowRole::Header) | None => RowRole::Data,
                Some(role) => *role,
            },
            cells: grid.row_texts(r).map(str::to_string).collect(),
        })
        .collect();
    Ok(TableJson { headers, rows })
}
