use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::grid::TableGrid;
use super::TableError;
use crate::text::fold;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowRole {
    Header,
    Data,
    Subtotal,
    Total,
}

impl RowRole {
    pub fn as_str(self) -> &'static str {
        match self {
            RowRole::Header => "header",
            RowRole::Data => "data",
            RowRole::Subtotal => "subtotal",
            RowRole::Total => "total",
        }
    }
}

impl fmt::Display for RowRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RowRole {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "header" => Ok(RowRole::Header),
            "data" => Ok(RowRole::Data),
            "subtotal" => Ok(RowRole::Subtotal),
            "total" => Ok(RowRole::Total),
            other => Err(format!("unknown row role {other:?}")),
        }
    }
}

/// Keyword lists driving subtotal/total detection. Matching is case- and
/// accent-insensitive substring containment.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleKeywordConfig {
    pub subtotal: Vec<String>,
    pub total: Vec<String>,
}

impl Default for RoleKeywordConfig {
    fn default() -> Self {
        RoleKeywordConfig {
            subtotal: vec!["sous-total".into(), "sous total".into(), "subtotal".into()],
            total: vec!["total".into()],
        }
    }
}

impl RoleKeywordConfig {
    pub fn from_file(path: &Path) -> Result<Self, TableError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TableError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| TableError::Config(format!("{}: {e}", path.display())))
    }
}

fn any_keyword(folded_cells: &[String], keywords: &[String]) -> bool {
    keywords.iter().map(|k| fold(k)).any(|k| folded_cells.iter().any(|c| c.contains(&k)))
}

/// Header rows first, then keyword classification of every body row.
/// The subtotal test runs before the total test ("sous-total" contains "total").
pub fn detect_row_roles(grid: &TableGrid, keywords: &RoleKeywordConfig) -> Vec<RowRole> {
    (0..grid.n_rows)
        .map(|r| {
            if r < grid.header_row_count {
                return RowRole::Header;
            }
            let cells: Vec<String> = grid.row_texts(r).map(fold).collect();
            if any_keyword(&cells, &keywords.subtotal) {
                RowRole::Subtotal
            } else if any_keyword(&cells, &keywords.total) {
                RowRole::Total
            } else {
                RowRole::Data
            }
        })
        .collect()
}
