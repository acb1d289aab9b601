use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::category::QuestionCategory;
use crate::table::RowRole;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub qid: usize,
    pub text: String,
    #[serde(default = "other")]
    pub gold_category: QuestionCategory,
    #[serde(default)]
    pub gold_answer: String,
}

fn other() -> QuestionCategory {
    QuestionCategory::Other
}

/// One table with its questions. `row_roles`, when present, gives the role
/// of every body row of `gt_html` and overrides keyword detection.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_path: Option<PathBuf>,
    pub gt_html: String,
    pub questions: Vec<Question>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row_roles: Option<Vec<RowRole>>,
}
