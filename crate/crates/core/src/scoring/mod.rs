//! Exact-match answer scoring and run reports.

mod normalize;
mod report;

pub use normalize::{exact_match, normalize_answer, NormalizedAnswer};
pub use report::{
    aggregate, AggregateOptions, AnswerSource, CategoryScore, Confusion, EvalReport, ScoringError, Throughput,
    FIG_STAGES,
};
