use serde::{Serialize, Serializer};
use serde_json::{json, Value};

use crate::table::RowRole;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SortOrder {
    Asc,
    Desc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LookupMode {
    First,
    All,
}

/// Row selector of KTH_ROW. `Nth(0)` is representable so that validation can reject it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RowPick {
    Nth(u64),
    Last,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ArgmaxReturn {
    RowIndex,
    Column(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Op {
    ExcludeRoles { roles: Vec<RowRole> },
    KeepRoles { roles: Vec<RowRole> },
    FilterEq { col: String, value: String },
    Sort { col: String, order: SortOrder, numeric: bool },
    Lookup { key_col: String, key_value: String, target_col: String, mode: LookupMode, empty_to_na: bool },
    KthRow { k: RowPick, target_col: String, data_only: bool },
    Sum { col: String },
    Count { col: String, value: Option<String> },
    Argmax { col: String, ret: ArgmaxReturn, all_ties: bool },
    Diff { a: Box<Op>, b: Box<Op> },
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::ExcludeRoles { .. } => "EXCLUDE_ROLES",
            Op::KeepRoles { .. } => "KEEP_ROLES",
            Op::FilterEq { .. } => "FILTER_EQ",
            Op::Sort { .. } => "SORT",
            Op::Lookup { .. } => "LOOKUP",
            Op::KthRow { .. } => "KTH_ROW",
            Op::Sum { .. } => "SUM",
            Op::Count { .. } => "COUNT",
            Op::Argmax { .. } => "ARGMAX",
            Op::Diff { .. } => "DIFF",
        }
    }

    pub fn is_context(&self) -> bool {
        matches!(self, Op::ExcludeRoles { .. } | Op::KeepRoles { .. } | Op::FilterEq { .. } | Op::Sort { .. })
    }

    pub fn is_terminal(&self) -> bool {
        !self.is_context()
    }

    /// Terminals whose answer is a number (used by the grounding check).
    pub fn is_numeric_terminal(&self) -> bool {
        matches!(self, Op::Sum { .. } | Op::Count { .. } | Op::Argmax { .. } | Op::Diff { .. })
    }

    /// Header strings this op refers to, in field order.
    pub fn headers(&self) -> Vec<&str> {
        match self {
            Op::ExcludeRoles { .. } | Op::KeepRoles { .. } => vec![],
            Op::FilterEq { col, .. } | Op::Sort { col, .. } | Op::Sum { col } | Op::Count { col, .. } => vec![col],
            Op::Lookup { key_col, target_col, .. } => vec![key_col, target_col],
            Op::KthRow { target_col, .. } => vec![target_col],
            Op::Argmax { col, ret, .. } => match ret {
                ArgmaxReturn::RowIndex => vec![col],
                ArgmaxReturn::Column(h) => vec![col, h],
            },
            Op::Diff { a, b } => a.headers().into_iter().chain(b.headers()).collect(),
        }
    }

    /// Wire-format JSON, with every field spelled out.
    pub fn to_json(&self) -> Value {
        let roles = |rs: &[RowRole]| Value::from(rs.iter().map(|r| r.as_str()).collect::<Vec<_>>());
        match self {
            Op::ExcludeRoles { roles: rs } => json!({"op": "EXCLUDE_ROLES", "roles": roles(rs)}),
            Op::KeepRoles { roles: rs } => json!({"op": "KEEP_ROLES", "roles": roles(rs)}),
            Op::FilterEq { col, value } => json!({"op": "FILTER_EQ", "col": col, "value": value}),
            Op::Sort { col, order, numeric } => json!({
                "op": "SORT",
                "col": col,
                "order": if *order == SortOrder::Asc { "asc" } else { "desc" },
                "numeric": numeric,
            }),
            Op::Lookup { key_col, key_value, target_col, mode, empty_to_na } => json!({
                "op": "LOOKUP",
                "key_col": key_col,
                "key_value": key_value,
                "target_col": target_col,
                "mode": if *mode == LookupMode::First { "first" } else { "all" },
                "empty_to_na": empty_to_na,
            }),
            Op::KthRow { k, target_col, data_only } => json!({
                "op": "KTH_ROW",
                "k": match k { RowPick::Nth(n) => json!(n), RowPick::Last => json!("last") },
                "target_col": target_col,
                "data_only": data_only,
            }),
            Op::Sum { col } => json!({"op": "SUM", "col": col}),
            Op::Count { col, value } => match value {
                Some(v) => json!({"op": "COUNT", "col": col, "value": v}),
                None => json!({"op": "COUNT", "col": col}),
            },
            Op::Argmax { col, ret, all_ties } => json!({
                "op": "ARGMAX",
                "col": col,
                "return": match ret {
                    ArgmaxReturn::RowIndex => "row_index".to_string(),
                    ArgmaxReturn::Column(h) => format!("col:{h}"),
                },
                "all_ties": all_ties,
            }),
            Op::Diff { a, b } => json!({"op": "DIFF", "a": a.to_json(), "b": b.to_json()}),
        }
    }
}

impl Serialize for Op {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Program {
    pub qid: usize,
    pub ops: Vec<Op>,
}

impl Program {
    pub fn new(qid: usize, ops: Vec<Op>) -> Self {
        Program { qid, ops }
    }

    pub fn terminal(&self) -> Option<&Op> {
        self.ops.last().filter(|op| op.is_terminal())
    }

    pub fn to_json(&self) -> Value {
        json!({"qid": self.qid, "ops": self.ops.iter().map(Op::to_json).collect::<Vec<_>>()})
    }
}
