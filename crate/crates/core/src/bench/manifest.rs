use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::category::QuestionCategory;
use crate::sample::{Question, Sample};
use crate::table::{sanitize_html, RowRole};

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("cannot read manifest {path}: {source}")]
    FileUnreadable { path: PathBuf, source: std::io::Error },
    #[error("manifest {0} holds no usable samples")]
    EmptyManifest(PathBuf),
}

/// A problem with one manifest line. Errors drop the line, warnings keep it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineIssue {
    pub line: usize,
    pub skipped: bool,
    pub message: String,
}

#[derive(Debug, Deserialize)]
struct RawQuestion {
    qid: Option<usize>,
    text: String,
    #[serde(default)]
    gold_category: Option<String>,
    #[serde(default)]
    gold_answer: String,
}

#[derive(Debug, Deserialize)]
struct RawLine {
    id: String,
    #[serde(default)]
    image_path: Option<PathBuf>,
    #[serde(default)]
    gt_html: Option<String>,
    #[serde(default)]
    gt_html_file: Option<PathBuf>,
    questions: Vec<RawQuestion>,
    #[serde(default)]
    row_roles: Option<Vec<RowRole>>,
}

#[derive(Debug)]
pub struct Manifest {
    pub samples: Vec<Sample>,
    pub issues: Vec<LineIssue>,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn parse_line(text: &str, base: &Path, warn: &mut Vec<String>) -> Result<Sample, String> {
    let raw: RawLine = serde_json::from_str(text).map_err(|e| format!("invalid JSON: {e}"))?;
    let gt_html = match (raw.gt_html, raw.gt_html_file) {
        (Some(h), _) => h,
        (None, Some(f)) => {
            let path = resolve(base, &f);
            std::fs::read_to_string(&path).map_err(|e| format!("cannot read {}: {e}", path.display()))?
        }
        (None, None) => return Err("neither gt_html nor gt_html_file given".into()),
    };
    sanitize_html(&gt_html).map_err(|e| format!("gt_html: {e}"))?;
    let mut questions = Vec::with_capacity(raw.questions.len());
    for (i, q) in raw.questions.into_iter().enumerate() {
        if q.qid.is_some_and(|qid| qid != i + 1) {
            return Err(format!("qids must be 1-based and consecutive; question {} has qid {:?}", i + 1, q.qid));
        }
        let label = q.gold_category.unwrap_or_else(|| "other".into());
        let gold_category = QuestionCategory::parse_lenient(&label);
        if gold_category == QuestionCategory::Other && !label.trim().eq_ignore_ascii_case("other") {
            warn.push(format!("question {}: unknown category {label:?} mapped to other", i + 1));
        }
        questions.push(Question { qid: i + 1, text: q.text, gold_category, gold_answer: q.gold_answer });
    }
    Ok(Sample {
        id: raw.id,
        image_path: raw.image_path.map(|p| resolve(base, &p)),
        gt_html,
        questions,
        row_roles: raw.row_roles,
    })
}

/// Reads a JSON-Lines manifest. Relative paths resolve against the manifest's
/// directory. Bad lines are skipped and reported in `issues`.
pub fn load_manifest(path: &Path) -> Result<Manifest, ManifestError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ManifestError::FileUnreadable { path: path.to_path_buf(), source })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut samples = Vec::new();
    let mut issues = Vec::new();
    let mut seen = HashSet::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut warnings = Vec::new();
        match parse_line(line, base, &mut warnings) {
            Ok(sample) if !seen.insert(sample.id.clone()) => {
                issues.push(LineIssue { line: line_no, skipped: true, message: format!("duplicate id {}", sample.id) });
            }
            Ok(sample) => {
                issues.extend(warnings.into_iter().map(|message| LineIssue { line: line_no, skipped: false, message }));
                samples.push(sample);
            }
            Err(message) => issues.push(LineIssue { line: line_no, skipped: true, message }),
        }
    }
    for i in &issues {
        tracing::warn!(line = i.line, skipped = i.skipped, "{}", i.message);
    }
    if samples.is_empty() {
        return Err(ManifestError::EmptyManifest(path.to_path_buf()));
    }
    Ok(Manifest { samples, issues })
}

/// One JSON object per line, in order.
pub fn manifest_jsonl(samples: &[Sample]) -> String {
    let mut out = String::new();
    for s in samples {
        out.push_str(&serde_json::to_string(s).expect("sample serializes"));
        out.push('\n');
    }
    out
}
