use serde_json::{Map, Value};

use super::ops::{ArgmaxReturn, LookupMode, Op, Program, RowPick, SortOrder};
use super::{ExecError, ExecErrorKind};
use crate::jsonx::extract_json;
use crate::table::RowRole;

const OP_NAMES: [&str; 10] = [
    "EXCLUDE_ROLES",
    "KEEP_ROLES",
    "FILTER_EQ",
    "SORT",
    "LOOKUP",
    "KTH_ROW",
    "SUM",
    "COUNT",
    "ARGMAX",
    "DIFF",
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DslError {
    #[error("no JSON object found in planner output")]
    NoJsonObject,
    #[error("planner output does not follow the programs schema: {0}")]
    BadSchema(String),
}

/// One planner entry: the qid it binds to and either a program or the error
/// that makes it invalid (e.g. an op outside the closed set).
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedProgram {
    pub qid: usize,
    pub raw: Value,
    pub program: Result<Program, ExecError>,
}

struct Fields<'a> {
    op: &'static str,
    map: &'a Map<String, Value>,
}

impl<'a> Fields<'a> {
    fn missing(&self, key: &str) -> ExecError {
        ExecError::bad_shape(format!("{} is missing field \"{key}\"", self.op))
    }

    fn string(&self, key: &str) -> Result<String, ExecError> {
        self.opt_string(key)?.ok_or_else(|| self.missing(key))
    }

    fn opt_string(&self, key: &str) -> Result<Option<String>, ExecError> {
        match self.map.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(Value::Number(n)) => Ok(Some(n.to_string())),
            Some(other) => Err(ExecError::bad_shape(format!(
                "{} field \"{key}\" must be a string, got {other}",
                self.op
            ))),
        }
    }

    fn flag(&self, key: &str) -> Result<bool, ExecError> {
        match self.map.get(key) {
            None | Some(Value::Null) => Ok(false),
            Some(Value::Bool(b)) => Ok(*b),
            Some(Value::String(s)) if s.eq_ignore_ascii_case("true") => Ok(true),
            Some(Value::String(s)) if s.eq_ignore_ascii_case("false") => Ok(false),
            Some(other) => Err(ExecError::bad_shape(format!(
                "{} field \"{key}\" must be true or false, got {other}",
                self.op
            ))),
        }
    }

    fn roles(&self) -> Result<Vec<RowRole>, ExecError> {
        let items = match self.map.get("roles") {
            None => return Err(self.missing("roles")),
            Some(Value::Array(items)) => items.clone(),
            Some(Value::String(s)) => vec![Value::String(s.clone())],
            Some(other) => {
                return Err(ExecError::bad_shape(format!("{} field \"roles\" must be a list, got {other}", self.op)))
            }
        };
        items
            .iter()
            .map(|v| {
                v.as_str()
                    .and_then(|s| s.parse::<RowRole>().ok())
                    .ok_or_else(|| ExecError::bad_shape(format!("{} has unknown role {v}", self.op)))
            })
            .collect()
    }

    fn sub_op(&self, key: &str) -> Result<Box<Op>, ExecError> {
        let v = self.map.get(key).ok_or_else(|| self.missing(key))?;
        parse_op(v).map(Box::new)
    }
}

fn canonical_name(name: &str) -> Option<&'static str> {
    let upper = name.trim().to_ascii_uppercase();
    OP_NAMES.iter().copied().find(|n| *n == upper)
}

/// Parses one op object in wire format. Unspecified optional fields take
/// their defaults (asc, non-numeric, first, false, row_index).
pub fn parse_op(v: &Value) -> Result<Op, ExecError> {
    let map = v
        .as_object()
        .ok_or_else(|| ExecError::bad_shape(format!("op must be a JSON object, got {v}")))?;
    let raw_name = match map.get("op") {
        Some(Value::String(s)) => s.as_str(),
        _ => return Err(ExecError::bad_shape(format!("op object has no \"op\" name: {v}"))),
    };
    let op = canonical_name(raw_name).ok_or_else(|| {
        ExecError::new(
            ExecErrorKind::UnknownOp,
            format!("unknown op \"{raw_name}\"; allowed ops: {}", OP_NAMES.join(", ")),
        )
    })?;
    let f = Fields { op, map };
    Ok(match op {
        "EXCLUDE_ROLES" => Op::ExcludeRoles { roles: f.roles()? },
        "KEEP_ROLES" => Op::KeepRoles { roles: f.roles()? },
        "FILTER_EQ" => Op::FilterEq { col: f.string("col")?, value: f.string("value")? },
        "SORT" => {
            let order = match f.opt_string("order")?.map(|s| s.to_ascii_lowercase()) {
                None => SortOrder::Asc,
                Some(s) if s == "asc" => SortOrder::Asc,
                Some(s) if s == "desc" => SortOrder::Desc,
                Some(s) => return Err(ExecError::bad_shape(format!("SORT order must be asc or desc, got \"{s}\""))),
            };
            Op::Sort { col: f.string("col")?, order, numeric: f.flag("numeric")? }
        }
        "LOOKUP" => {
            let mode = match f.opt_string("mode")?.map(|s| s.to_ascii_lowercase()) {
                None => LookupMode::First,
                Some(s) if s == "first" => LookupMode::First,
                Some(s) if s == "all" => LookupMode::All,
                Some(s) => return Err(ExecError::bad_shape(format!("LOOKUP mode must be first or all, got \"{s}\""))),
            };
            Op::Lookup {
                key_col: f.string("key_col")?,
                key_value: f.string("key_value")?,
                target_col: f.string("target_col")?,
                mode,
                empty_to_na: f.flag("empty_to_na")?,
            }
        }
        "KTH_ROW" => {
            let k = match map.get("k") {
                None => return Err(f.missing("k")),
                Some(Value::Number(n)) => match n.as_i64() {
                    Some(k) if k >= 0 => RowPick::Nth(k as u64),
                    _ => return Err(ExecError::bad_shape(format!("KTH_ROW k must be >= 1 or \"last\", got {n}"))),
                },
                Some(Value::String(s)) if s.trim().eq_ignore_ascii_case("last") => RowPick::Last,
                Some(Value::String(s)) => match s.trim().parse::<u64>() {
                    Ok(k) => RowPick::Nth(k),
                    Err(_) => return Err(ExecError::bad_shape(format!("KTH_ROW k must be >= 1 or \"last\", got \"{s}\""))),
                },
                Some(other) => return Err(ExecError::bad_shape(format!("KTH_ROW k must be >= 1 or \"last\", got {other}"))),
            };
            Op::KthRow { k, target_col: f.string("target_col")?, data_only: f.flag("data_only")? }
        }
        "SUM" => Op::Sum { col: f.string("col")? },
        "COUNT" => Op::Count { col: f.string("col")?, value: f.opt_string("value")? },
        "ARGMAX" => {
            let ret = match f.opt_string("return")? {
                None => ArgmaxReturn::RowIndex,
                Some(s) if s == "row_index" => ArgmaxReturn::RowIndex,
                Some(s) => match s.strip_prefix("col:") {
                    Some(h) => ArgmaxReturn::Column(h.to_string()),
                    None => {
                        return Err(ExecError::bad_shape(format!(
                            "ARGMAX return must be \"row_index\" or \"col:<header>\", got \"{s}\""
                        )))
                    }
                },
            };
            Op::Argmax { col: f.string("col")?, ret, all_ties: f.flag("all_ties")? }
        }
        "DIFF" => Op::Diff { a: f.sub_op("a")?, b: f.sub_op("b")? },
        _ => unreachable!("op names are listed in OP_NAMES"),
    })
}

fn parse_qid(v: &Value) -> Option<usize> {
    match v {
        Value::Number(n) => n.as_u64().map(|q| q as usize),
        Value::String(s) => s.trim().trim_start_matches(['Q', 'q']).parse().ok(),
        _ => None,
    }
    .filter(|q| *q >= 1)
}

/// Parses a `{"qid":..,"ops":[..]}` object. `fallback_qid` is used when the
/// qid field is absent.
pub fn parse_program_value(v: &Value, fallback_qid: Option<usize>) -> Result<Program, ExecError> {
    let qid = match v.get("qid") {
        Some(q) => parse_qid(q).ok_or_else(|| ExecError::bad_shape(format!("invalid qid {q}")))?,
        None => fallback_qid.ok_or_else(|| ExecError::bad_shape("program has no qid"))?,
    };
    let ops = match v.get("ops") {
        Some(Value::Array(ops)) => ops,
        Some(other) => return Err(ExecError::bad_shape(format!("\"ops\" must be a list, got {other}"))),
        None => return Err(ExecError::bad_shape("program has no \"ops\" list")),
    };
    let ops = ops.iter().map(parse_op).collect::<Result<Vec<_>, _>>()?;
    Ok(Program::new(qid, ops))
}

/// Extracts the first JSON value from planner output and binds each entry of
/// its `programs` list to a qid. Entries without a qid bind to their position.
pub fn parse_programs(text: &str) -> Result<Vec<ParsedProgram>, DslError> {
    let value = extract_json(text).ok_or(DslError::NoJsonObject)?;
    let entries: Vec<Value> = match &value {
        Value::Object(map) => match map.get("programs") {
            Some(Value::Array(items)) => items.clone(),
            Some(other) => return Err(DslError::BadSchema(format!("\"programs\" must be a list, got {other}"))),
            None if map.contains_key("ops") => vec![value.clone()],
            None => return Err(DslError::BadSchema("missing \"programs\" list".into())),
        },
        Value::Array(items) => items.clone(),
        _ => return Err(DslError::NoJsonObject),
    };
    Ok(entries
        .into_iter()
        .enumerate()
        .filter_map(|(i, raw)| {
            let qid = match raw.get("qid") {
                Some(q) => parse_qid(q)?,
                None => i + 1,
            };
            let program = parse_program_value(&raw, Some(qid));
            Some(ParsedProgram { qid, raw, program })
        })
        .collect())
}
