use serde::{Deserialize, Serialize};

use super::{ChatRequest, Decoding, GatewayError, ImagePayload, Stage};

pub const TSR_SYSTEM: &str = include_str!("templates/tsr_system.txt");
pub const TSR_USER: &str = include_str!("templates/tsr_user.txt");
pub const QA_SYSTEM: &str = include_str!("templates/qa_system.txt");
pub const QA_USER: &str = include_str!("templates/qa_user.txt");
pub const ROUTE_SYSTEM: &str = include_str!("templates/route_system.txt");
pub const ROUTE_USER: &str = include_str!("templates/route_user.txt");
pub const PLAN_SYSTEM: &str = include_str!("templates/plan_system.txt");
pub const PLAN_USER: &str = include_str!("templates/plan_user.txt");
pub const REPAIR_SYSTEM: &str = include_str!("templates/repair_system.txt");
pub const REPAIR_USER: &str = include_str!("templates/repair_user.txt");

const QUESTION_BLOCK: &str = "Q1: ...\nQ2: ...\n...\nQN: ...";
const TABLE_SLOT: &str = "{...}";
const HINTS_SLOT: &str = "[\"...\", \"...\", ...]";

pub const DEFAULT_STOP_STRINGS: [&str; 5] = ["```", "<|im_end|>", "<|eot_id|>", "<|end|>", "</s>"];

/// Everything a prompt may need. Questions carry their 1-based qid.
#[derive(Clone, Debug, Default)]
pub struct PromptPayload {
    pub questions: Vec<(usize, String)>,
    pub table_json: Option<String>,
    pub category_hints: Option<Vec<String>>,
    pub qid: Option<usize>,
    pub category: Option<String>,
    pub question: Option<String>,
    pub error: Option<String>,
    /// Ground-truth HTML given in place of the image (oracle mode).
    pub table_html: Option<String>,
    pub image: Option<ImagePayload>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RequestOptions {
    pub merge_system: bool,
    pub temperature: f64,
    pub top_p: f64,
    pub repetition_penalty: f64,
    pub stop_strings: Vec<String>,
}

impl Default for RequestOptions {
    fn default() -> Self {
        RequestOptions {
            merge_system: false,
            temperature: 0.0,
            top_p: 1.0,
            repetition_penalty: 1.1,
            stop_strings: DEFAULT_STOP_STRINGS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

fn fill(template: &str, slot: &str, value: &str) -> String {
    debug_assert!(template.contains(slot), "template lacks slot {slot}");
    template.replacen(slot, value, 1)
}

fn question_lines(questions: &[(usize, String)], positional: bool) -> String {
    questions
        .iter()
        .enumerate()
        .map(|(i, (qid, text))| format!("Q{}: {}", if positional { i + 1 } else { *qid }, text))
        .collect::<Vec<_>>()
        .join("\n")
}

fn need<'a, T>(slot: &str, v: &'a Option<T>) -> Result<&'a T, GatewayError> {
    v.as_ref().ok_or_else(|| GatewayError::MissingSlot(slot.to_string()))
}

fn need_questions(p: &PromptPayload) -> Result<(), GatewayError> {
    if p.questions.is_empty() {
        Err(GatewayError::MissingSlot("questions".into()))
    } else {
        Ok(())
    }
}

/// Renders the (system, user) pair for a stage.
pub fn render(stage: Stage, p: &PromptPayload) -> Result<(String, String), GatewayError> {
    Ok(match stage {
        Stage::Tsr => (TSR_SYSTEM.to_string(), TSR_USER.to_string()),
        Stage::DirectQa => {
            need_questions(p)?;
            let user = fill(QA_USER, "asked N questions", &format!("asked {} questions", p.questions.len()));
            let user = fill(&user, QUESTION_BLOCK, &question_lines(&p.questions, true));
            let user = match &p.table_html {
                Some(html) => format!("TABLE_HTML:\n{html}\n\n{user}"),
                None => user,
            };
            (QA_SYSTEM.to_string(), user)
        }
        Stage::Route => {
            need_questions(p)?;
            (ROUTE_SYSTEM.to_string(), fill(ROUTE_USER, QUESTION_BLOCK, &question_lines(&p.questions, true)))
        }
        Stage::Plan => {
            need_questions(p)?;
            let table = need("TABLE_JSON", &p.table_json)?;
            let hints = need("CATEGORY_HINTS", &p.category_hints)?;
            if hints.len() != p.questions.len() {
                return Err(GatewayError::MissingSlot(format!(
                    "CATEGORY_HINTS has {} entries for {} questions",
                    hints.len(),
                    p.questions.len()
                )));
            }
            let hints = serde_json::to_string(hints).expect("strings serialize");
            let user = fill(PLAN_USER, TABLE_SLOT, table);
            let user = fill(&user, HINTS_SLOT, &hints);
            let user = fill(&user, QUESTION_BLOCK, &question_lines(&p.questions, false));
            (PLAN_SYSTEM.to_string(), user)
        }
        Stage::Repair => {
            let table = need("TABLE_JSON", &p.table_json)?;
            let qid = need("QID", &p.qid)?;
            let user = fill(REPAIR_USER, TABLE_SLOT, table);
            let user = fill(&user, "QID: 1", &format!("QID: {qid}"));
            let user = fill(&user, "CATEGORY: ...", &format!("CATEGORY: {}", need("CATEGORY", &p.category)?));
            let user = fill(&user, "QUESTION: ...", &format!("QUESTION: {}", need("QUESTION", &p.question)?));
            let user = fill(&user, "ERROR: ...", &format!("ERROR: {}", need("ERROR", &p.error)?));
            (REPAIR_SYSTEM.to_string(), user)
        }
    })
}

/// Assembles a full request. With `merge_system` the system text is folded
/// into the user message (for chat templates without a system role).
pub fn build_request(stage: Stage, p: &PromptPayload, opts: &RequestOptions) -> Result<ChatRequest, GatewayError> {
    let (system, user) = render(stage, p)?;
    let (system, user) = if opts.merge_system {
        (String::new(), format!("{system}\n\n{user}"))
    } else {
        (system, user)
    };
    let image = match stage {
        Stage::Tsr | Stage::DirectQa => p.image.clone(),
        _ => None,
    };
    Ok(ChatRequest {
        stage,
        system,
        user,
        image,
        decoding: Decoding {
            temperature: opts.temperature,
            top_p: opts.top_p,
            repetition_penalty: opts.repetition_penalty,
            max_new_tokens: stage.max_new_tokens(),
        },
        stop_strings: opts.stop_strings.clone(),
    })
}
