use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::ops::{ArgmaxReturn, LookupMode, Op, Program, RowPick, SortOrder};
use super::validate::validate;
use super::{ExecError, ExecErrorKind};
use crate::money::{detect_convention, format_decimal, parse_amount, Convention, Decimal};
use crate::table::{RowRole, TableJson, TableRow};
use crate::text::fold;

/// How numeric answers are rendered. `convention: None` picks the majority
/// convention of the table's cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FormatPolicy {
    pub convention: Option<Convention>,
    pub min_scale: u32,
}

impl Default for FormatPolicy {
    fn default() -> Self {
        FormatPolicy { convention: None, min_scale: 2 }
    }
}

impl FormatPolicy {
    pub fn resolve(&self, table: &TableJson) -> Convention {
        self.convention.unwrap_or_else(|| {
            detect_convention(table.rows.iter().flat_map(|r| r.cells.iter().map(String::as_str)))
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellRef {
    pub row: usize,
    pub col: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub op: Value,
    pub rows_in: Vec<usize>,
    pub rows_out: Vec<usize>,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Value(String),
    Error(ExecError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecTrace {
    pub qid: usize,
    pub steps: Vec<TraceStep>,
    pub contributing_cells: Vec<CellRef>,
    /// Non-empty cells that a numeric op could not parse.
    pub skipped_cells: Vec<CellRef>,
    pub terminal: Option<String>,
    pub outcome: Outcome,
}

impl ExecTrace {
    pub fn answer(&self) -> Result<&str, &ExecError> {
        match &self.outcome {
            Outcome::Value(v) => Ok(v),
            Outcome::Error(e) => Err(e),
        }
    }

    /// Short one-line rendering used in repair prompts.
    pub fn summary(&self) -> String {
        let steps: Vec<String> = self
            .steps
            .iter()
            .map(|s| {
                let name = s.op.get("op").and_then(Value::as_str).unwrap_or("?");
                format!("{name} rows {:?} -> {:?}", s.rows_in, s.rows_out)
            })
            .collect();
        if steps.is_empty() {
            "no steps executed".into()
        } else {
            steps.join("; ")
        }
    }
}

enum TermValue {
    Number(Decimal),
    Count(usize),
    Text(String),
}

struct TermResult {
    value: TermValue,
    rows_out: Vec<usize>,
    cells: Vec<CellRef>,
    note: String,
}

struct Ctx<'a> {
    table: &'a TableJson,
    skipped: Vec<CellRef>,
}

impl<'a> Ctx<'a> {
    fn row(&self, index: usize) -> &'a TableRow {
        &self.table.rows[index - 1]
    }

    fn col(&self, header: &str) -> usize {
        self.table.column(header).expect("headers checked by validate")
    }

    fn cell(&self, index: usize, col: usize) -> &'a str {
        &self.row(index).cells[col]
    }

    fn apply_context(&self, op: &Op, rows: &[usize]) -> (Vec<usize>, String) {
        match op {
            Op::ExcludeRoles { roles } => {
                let out: Vec<usize> = rows.iter().copied().filter(|&i| !roles.contains(&self.row(i).role)).collect();
                let note = format!("dropped {} row(s)", rows.len() - out.len());
                (out, note)
            }
            Op::KeepRoles { roles } => {
                let out: Vec<usize> = rows.iter().copied().filter(|&i| roles.contains(&self.row(i).role)).collect();
                let note = format!("kept {} row(s)", out.len());
                (out, note)
            }
            Op::FilterEq { col, value } => {
                let c = self.col(col);
                let want = fold(value);
                let out: Vec<usize> = rows.iter().copied().filter(|&i| fold(self.cell(i, c)) == want).collect();
                let note = format!("{} row(s) match", out.len());
                (out, note)
            }
            Op::Sort { col, order, numeric } => {
                let c = self.col(col);
                let mut out = rows.to_vec();
                if *numeric {
                    let key = |i: usize| parse_amount(self.cell(i, c)).map(|a| a.value);
                    out.sort_by(|&x, &y| match (key(x), key(y)) {
                        (Some(a), Some(b)) if *order == SortOrder::Asc => a.cmp(&b),
                        (Some(a), Some(b)) => b.cmp(&a),
                        (Some(_), None) => Ordering::Less,
                        (None, Some(_)) => Ordering::Greater,
                        (None, None) => Ordering::Equal,
                    });
                } else {
                    out.sort_by(|&x, &y| {
                        let (a, b) = (fold(self.cell(x, c)), fold(self.cell(y, c)));
                        if *order == SortOrder::Asc {
                            a.cmp(&b)
                        } else {
                            b.cmp(&a)
                        }
                    });
                }
                (out, String::new())
            }
            _ => unreachable!("terminal op in context position"),
        }
    }

    fn nonempty(&self, rows: &[usize], op: &Op) -> Result<(), ExecError> {
        if rows.is_empty() {
            Err(ExecError::new(ExecErrorKind::EmptySelection, format!("{}: no rows left in context", op.name())))
        } else {
            Ok(())
        }
    }

    fn terminal(&mut self, op: &Op, rows: &[usize]) -> Result<TermResult, ExecError> {
        match op {
            Op::Sum { col } => {
                self.nonempty(rows, op)?;
                let c = self.col(col);
                let mut total = Decimal::zero();
                let mut used = Vec::new();
                let mut cells = Vec::new();
                let mut skipped = 0;
                for &i in rows {
                    let text = self.cell(i, c);
                    if text.trim().is_empty() {
                        continue;
                    }
                    match parse_amount(text) {
                        Some(a) => {
                            total = &total + &a.value;
                            used.push(i);
                            cells.push(CellRef { row: i, col: col.clone() });
                        }
                        None => {
                            skipped += 1;
                            self.skipped.push(CellRef { row: i, col: col.clone() });
                        }
                    }
                }
                if used.is_empty() {
                    return Err(ExecError::new(
                        ExecErrorKind::NoNumericValues,
                        format!("SUM found no numeric values in column \"{col}\""),
                    ));
                }
                let note = format!("summed {} cell(s), skipped {skipped}", used.len());
                Ok(TermResult { value: TermValue::Number(total), rows_out: used, cells, note })
            }
            Op::Count { col, value } => {
                let c = self.col(col);
                let cells: Vec<CellRef> = rows.iter().map(|&i| CellRef { row: i, col: col.clone() }).collect();
                let matched: Vec<usize> = match value {
                    Some(v) => {
                        let want = fold(v);
                        rows.iter().copied().filter(|&i| fold(self.cell(i, c)) == want).collect()
                    }
                    None => rows.to_vec(),
                };
                let note = format!("{} of {} row(s)", matched.len(), rows.len());
                Ok(TermResult { value: TermValue::Count(matched.len()), rows_out: matched, cells, note })
            }
            Op::KthRow { k, target_col, data_only } => {
                let pool: Vec<usize> = rows
                    .iter()
                    .copied()
                    .filter(|&i| !*data_only || self.row(i).role == RowRole::Data)
                    .collect();
                self.nonempty(&pool, op)?;
                let pick = match k {
                    RowPick::Last => pool[pool.len() - 1],
                    RowPick::Nth(n) => *pool.get((*n as usize).saturating_sub(1)).ok_or_else(|| {
                        ExecError::new(
                            ExecErrorKind::EmptySelection,
                            format!("KTH_ROW k={n} but only {} row(s) in context", pool.len()),
                        )
                    })?,
                };
                let text = self.cell(pick, self.col(target_col)).to_string();
                Ok(TermResult {
                    value: TermValue::Text(text),
                    rows_out: vec![pick],
                    cells: vec![CellRef { row: pick, col: target_col.clone() }],
                    note: format!("picked row {pick}"),
                })
            }
            Op::Lookup { key_col, key_value, target_col, mode, empty_to_na } => {
                self.nonempty(rows, op)?;
                let (kc, tc) = (self.col(key_col), self.col(target_col));
                let want = fold(key_value);
                let mut hits: Vec<usize> = rows.iter().copied().filter(|&i| fold(self.cell(i, kc)) == want).collect();
                if hits.is_empty() {
                    return Err(ExecError::new(
                        ExecErrorKind::EmptySelection,
                        format!("LOOKUP found no row with \"{key_col}\" = \"{key_value}\""),
                    ));
                }
                if *mode == LookupMode::First {
                    hits.truncate(1);
                }
                let values: Vec<String> = hits
                    .iter()
                    .filter_map(|&i| match self.cell(i, tc) {
                        t if !t.trim().is_empty() => Some(t.to_string()),
                        _ if *empty_to_na => Some("N/A".to_string()),
                        _ => None,
                    })
                    .collect();
                let cells = hits.iter().map(|&i| CellRef { row: i, col: target_col.clone() }).collect();
                let note = format!("{} match(es)", hits.len());
                Ok(TermResult { value: TermValue::Text(values.join("; ")), rows_out: hits, cells, note })
            }
            Op::Argmax { col, ret, all_ties } => {
                self.nonempty(rows, op)?;
                let c = self.col(col);
                let parsed: Vec<(usize, Decimal)> =
                    rows.iter().filter_map(|&i| parse_amount(self.cell(i, c)).map(|a| (i, a.value))).collect();
                let max = parsed.iter().map(|(_, v)| v).max().cloned().ok_or_else(|| {
                    ExecError::new(
                        ExecErrorKind::NoNumericValues,
                        format!("ARGMAX found no numeric values in column \"{col}\""),
                    )
                })?;
                let mut winners: Vec<usize> = parsed.iter().filter(|(_, v)| *v == max).map(|(i, _)| *i).collect();
                if !*all_ties {
                    winners.truncate(1);
                }
                let mut cells: Vec<CellRef> = winners.iter().map(|&i| CellRef { row: i, col: col.clone() }).collect();
                let answer = match ret {
                    ArgmaxReturn::RowIndex => winners.iter().map(usize::to_string).collect::<Vec<_>>().join("; "),
                    ArgmaxReturn::Column(h) => {
                        let hc = self.col(h);
                        cells.extend(winners.iter().map(|&i| CellRef { row: i, col: h.clone() }));
                        winners.iter().map(|&i| self.cell(i, hc)).collect::<Vec<_>>().join("; ")
                    }
                };
                let note = format!("max {max} over {} numeric row(s)", parsed.len());
                Ok(TermResult { value: TermValue::Text(answer), rows_out: winners, cells, note })
            }
            Op::Diff { a, b } => {
                let ra = self.terminal(a, rows)?;
                let x = numeric_operand("a", a, ra.value)?;
                let rb = self.terminal(b, rows)?;
                let y = numeric_operand("b", b, rb.value)?;
                let mut rows_out = ra.rows_out;
                for i in rb.rows_out {
                    if !rows_out.contains(&i) {
                        rows_out.push(i);
                    }
                }
                let mut cells = ra.cells;
                cells.extend(rb.cells);
                let note = format!("a = {x}, b = {y}");
                Ok(TermResult { value: TermValue::Number(&x - &y), rows_out, cells, note })
            }
            _ => unreachable!("context op in terminal position"),
        }
    }
}

fn numeric_operand(slot: &str, op: &Op, v: TermValue) -> Result<Decimal, ExecError> {
    match v {
        TermValue::Number(d) => Ok(d),
        TermValue::Count(n) => Ok(Decimal::from_int(n as i64)),
        TermValue::Text(t) => parse_amount(&t).map(|a| a.value).ok_or_else(|| {
            ExecError::new(
                ExecErrorKind::NonNumericOperand,
                format!("DIFF operand {slot} ({}) gave non-numeric value \"{t}\"", op.name()),
            )
        }),
    }
}

/// Runs a program over the body rows of `table`. Never panics: invalid
/// programs come back as an error outcome in the trace.
pub fn execute(program: &Program, table: &TableJson, fmt: &FormatPolicy) -> ExecTrace {
    let mut trace = ExecTrace {
        qid: program.qid,
        steps: Vec::new(),
        contributing_cells: Vec::new(),
        skipped_cells: Vec::new(),
        terminal: program.terminal().map(|op| op.name().to_string()),
        outcome: Outcome::Value(String::new()),
    };
    if let Err(e) = validate(program, table) {
        trace.outcome = Outcome::Error(e);
        return trace;
    }
    let mut ctx = Ctx { table, skipped: Vec::new() };
    let mut rows: Vec<usize> = table.rows.iter().map(|r| r.index).collect();
    let (context, terminal) = program.ops.split_at(program.ops.len() - 1);
    for op in context {
        let (out, note) = ctx.apply_context(op, &rows);
        trace.steps.push(TraceStep { op: op.to_json(), rows_in: rows, rows_out: out.clone(), note });
        rows = out;
    }
    let op = &terminal[0];
    let result = ctx.terminal(op, &rows);
    trace.skipped_cells = ctx.skipped;
    trace.outcome = match result {
        Ok(r) => {
            let answer = match r.value {
                TermValue::Number(d) => format_decimal(&d, fmt.resolve(table), fmt.min_scale),
                TermValue::Count(n) => n.to_string(),
                TermValue::Text(t) => t,
            };
            trace.steps.push(TraceStep { op: op.to_json(), rows_in: rows, rows_out: r.rows_out, note: r.note });
            trace.contributing_cells = r.cells;
            Outcome::Value(answer)
        }
        Err(e) => {
            trace.steps.push(TraceStep { op: op.to_json(), rows_in: rows, rows_out: vec![], note: e.message.clone() });
            Outcome::Error(e)
        }
    };
    trace
}

/// Grounding check used by the override policy.
pub fn is_grounded(answer: &str, trace: &ExecTrace, table: &TableJson) -> bool {
    if answer.trim().is_empty() {
        return false;
    }
    let numeric = matches!(trace.terminal.as_deref(), Some("SUM" | "COUNT" | "ARGMAX" | "DIFF"));
    if numeric && trace.contributing_cells.is_empty() {
        return false;
    }
    trace.contributing_cells.iter().all(|c| table.cell(c.row, &c.col).is_some())
}
