use super::ops::{LookupMode, Op, Program, RowPick};
use super::{ExecError, ExecErrorKind};
use crate::category::QuestionCategory;
use crate::table::{RowRole, TableJson};

fn check_shape(op: &Op) -> Result<(), ExecError> {
    match op {
        Op::KthRow { k: RowPick::Nth(0), .. } => Err(ExecError::bad_shape("KTH_ROW k must be >= 1 or \"last\", got 0")),
        Op::Diff { a, b } => {
            for (slot, sub) in [("a", a), ("b", b)] {
                let ok = matches!(
                    **sub,
                    Op::Sum { .. } | Op::Count { .. } | Op::KthRow { .. } | Op::Lookup { mode: LookupMode::First, .. }
                );
                if !ok {
                    return Err(ExecError::bad_shape(format!(
                        "DIFF operand \"{slot}\" must be SUM, COUNT, KTH_ROW or LOOKUP with mode first, got {}",
                        sub.to_json()
                    )));
                }
                check_shape(sub)?;
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

fn check_headers(op: &Op, table: &TableJson) -> Result<(), ExecError> {
    for h in op.headers() {
        if !table.headers.iter().any(|t| t == h) {
            let available: Vec<String> = table.headers.iter().map(|t| format!("\"{t}\"")).collect();
            return Err(ExecError::new(
                ExecErrorKind::UnknownHeader,
                format!("{} references unknown header \"{h}\"; headers are [{}]", op.name(), available.join(", ")),
            ));
        }
    }
    Ok(())
}

/// Checks op ordering, the single trailing terminal, DIFF operand kinds,
/// `k >= 1` and exact header membership. Returns the first violation in op order.
pub fn validate(program: &Program, table: &TableJson) -> Result<(), ExecError> {
    let last = match program.ops.len() {
        0 => return Err(ExecError::bad_shape("program has no ops")),
        n => n - 1,
    };
    for (i, op) in program.ops.iter().enumerate() {
        if op.is_terminal() && i != last {
            return Err(ExecError::bad_shape(format!(
                "terminal op {} at position {} must be the last op; context ops come first",
                op.name(),
                i + 1
            )));
        }
        if i == last && op.is_context() {
            return Err(ExecError::bad_shape(format!(
                "program must end with a terminal op, last op is {}",
                op.name()
            )));
        }
        check_shape(op)?;
        check_headers(op, table)?;
    }
    Ok(())
}

/// Rule-based rewrite applied before execution: non-total aggregations drop
/// total/subtotal rows, total lookups keep only them. Explicit role ops win.
pub fn normalize(program: &Program, category: QuestionCategory) -> Program {
    let has = |f: fn(&Op) -> bool| program.ops.iter().any(f);
    let totals = vec![RowRole::Total, RowRole::Subtotal];
    let prefix = if category.is_arithmetic()
        && !has(|op| matches!(op, Op::ExcludeRoles { .. } | Op::KeepRoles { .. }))
    {
        Some(Op::ExcludeRoles { roles: totals })
    } else if category == QuestionCategory::TotalRowValue && !has(|op| matches!(op, Op::KeepRoles { .. })) {
        Some(Op::KeepRoles { roles: totals })
    } else {
        None
    };
    let mut out = program.clone();
    if let Some(op) = prefix {
        out.ops.insert(0, op);
    }
    out
}
