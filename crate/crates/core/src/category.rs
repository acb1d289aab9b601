use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Question taxonomy. The four arithmetic categories (see [`QuestionCategory::is_arithmetic`])
/// are the ones routed to program execution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionCategory {
    LookupByHeader,
    LookupListByHeader,
    KthRowValue,
    NaFromEmpty,
    TotalRowValue,
    AggregationSum,
    AggregationSumConditional,
    ComparisonArgmax,
    ComparisonArgmaxRows,
    CountEquals,
    ConsistencyDiffTotal,
    Other,
}

impl QuestionCategory {
    pub const ALL: [QuestionCategory; 12] = [
        QuestionCategory::LookupByHeader,
        QuestionCategory::LookupListByHeader,
        QuestionCategory::KthRowValue,
        QuestionCategory::NaFromEmpty,
        QuestionCategory::TotalRowValue,
        QuestionCategory::AggregationSum,
        QuestionCategory::AggregationSumConditional,
        QuestionCategory::ComparisonArgmax,
        QuestionCategory::ComparisonArgmaxRows,
        QuestionCategory::CountEquals,
        QuestionCategory::ConsistencyDiffTotal,
        QuestionCategory::Other,
    ];

    /// The eleven dataset categories (everything except `other`).
    pub fn labelled() -> impl Iterator<Item = QuestionCategory> {
        Self::ALL.into_iter().filter(|c| *c != QuestionCategory::Other)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            QuestionCategory::LookupByHeader => "lookup_by_header",
            QuestionCategory::LookupListByHeader => "lookup_list_by_header",
            QuestionCategory::KthRowValue => "kth_row_value",
            QuestionCategory::NaFromEmpty => "na_from_empty",
            QuestionCategory::TotalRowValue => "total_row_value",
            QuestionCategory::AggregationSum => "aggregation_sum",
            QuestionCategory::AggregationSumConditional => "aggregation_sum_conditional",
            QuestionCategory::ComparisonArgmax => "comparison_argmax",
            QuestionCategory::ComparisonArgmaxRows => "comparison_argmax_rows",
            QuestionCategory::CountEquals => "count_equals",
            QuestionCategory::ConsistencyDiffTotal => "consistency_diff_total",
            QuestionCategory::Other => "other",
        }
    }

    /// Short column label used in report tables.
    pub fn short_label(self) -> &'static str {
        match self {
            QuestionCategory::AggregationSum => "Sum",
            QuestionCategory::AggregationSumConditional => "Sum-C",
            QuestionCategory::TotalRowValue => "Total",
            QuestionCategory::ComparisonArgmax => "ArgMax",
            QuestionCategory::ComparisonArgmaxRows => "ArgMax-R",
            QuestionCategory::ConsistencyDiffTotal => "Diff",
            QuestionCategory::CountEquals => "Eq",
            QuestionCategory::LookupByHeader => "Lookup",
            QuestionCategory::LookupListByHeader => "Lookup-L",
            QuestionCategory::KthRowValue => "Kth",
            QuestionCategory::NaFromEmpty => "NA",
            QuestionCategory::Other => "Other",
        }
    }

    /// Complex-arithmetic categories handled by the program branch.
    pub fn is_arithmetic(self) -> bool {
        matches!(
            self,
            QuestionCategory::AggregationSum
                | QuestionCategory::AggregationSumConditional
                | QuestionCategory::CountEquals
                | QuestionCategory::ConsistencyDiffTotal
        )
    }

    /// Position in [`QuestionCategory::ALL`]; used as the confusion-matrix index.
    pub fn index(self) -> usize {
        Self::ALL.iter().position(|c| *c == self).expect("listed")
    }

    /// Lenient parse used on model output: unknown labels become `Other`.
    pub fn parse_lenient(label: &str) -> QuestionCategory {
        label.parse().unwrap_or(QuestionCategory::Other)
    }
}

impl fmt::Display for QuestionCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QuestionCategory {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == key)
            .ok_or_else(|| format!("unknown category {s:?}"))
    }
}
