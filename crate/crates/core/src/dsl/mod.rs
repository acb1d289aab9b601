//! The constrained table DSL: a closed set of context and terminal ops over
//! [`TableJson`](crate::table::TableJson), with exact-decimal execution.

mod exec;
mod ops;
mod parse;
mod validate;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use exec::{execute, is_grounded, CellRef, ExecTrace, FormatPolicy, Outcome, TraceStep};
pub use ops::{ArgmaxReturn, LookupMode, Op, Program, RowPick, SortOrder};
pub use parse::{parse_op, parse_program_value, parse_programs, DslError, ParsedProgram};
pub use validate::{normalize, validate};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExecErrorKind {
    UnknownOp,
    UnknownHeader,
    BadShape,
    EmptySelection,
    NoNumericValues,
    NonNumericOperand,
}

impl ExecErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExecErrorKind::UnknownOp => "UnknownOp",
            ExecErrorKind::UnknownHeader => "UnknownHeader",
            ExecErrorKind::BadShape => "BadShape",
            ExecErrorKind::EmptySelection => "EmptySelection",
            ExecErrorKind::NoNumericValues => "NoNumericValues",
            ExecErrorKind::NonNumericOperand => "NonNumericOperand",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{}: {message}", kind.as_str())]
pub struct ExecError {
    pub kind: ExecErrorKind,
    pub message: String,
}

impl ExecError {
    pub fn new(kind: ExecErrorKind, message: impl Into<String>) -> Self {
        ExecError { kind, message: message.into() }
    }
    pub fn bad_shape(message: impl Into<String>) -> Self {
        Self::new(ExecErrorKind::BadShape, message)
    }
}

impl fmt::Display for ExecErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
