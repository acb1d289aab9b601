//! HTML table reconstruction: sanitization, span-aware grid, row roles and
//! the planner-facing `TableJson`.

mod edit;
mod grid;
pub(crate) mod html;
mod json;
mod roles;

use thiserror::Error;

pub use edit::{apply_edit, EditError, EditOp};
pub use grid::{grid_from_raw, parse_table, CellSlot, SpanRect, TableGrid};
pub use html::{parse_raw, sanitize_html, RawCell, RawSection, RawTable, SectionKind};
pub use json::{to_table_json, TableJson, TableRow};
pub use roles::{detect_row_roles, RoleKeywordConfig, RowRole};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum TableError {
    #[error("no <table> element found")]
    NoTableFound,
    #[error("malformed table HTML: {0}")]
    MalformedHtml(String),
    #[error("table has no rows")]
    EmptyTable,
    #[error("role keyword config: {0}")]
    Config(String),
}

/// Sanitize, parse, detect roles and serialize in one go. Model output without
/// a table, or an empty table, yields an empty `TableJson`.
pub fn table_json_from_html(raw: &str, keywords: &RoleKeywordConfig) -> (TableGrid, TableJson) {
    let grid = sanitize_html(raw)
        .and_then(|html| parse_table(&html))
        .unwrap_or_default();
    let roles = detect_row_roles(&grid, keywords);
    let json = to_table_json(&grid, &roles).unwrap_or_default();
    (grid, json)
}
