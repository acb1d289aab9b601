//! The router pipeline: direct answers for every question, a program branch
//! for arithmetic categories, and an override only when execution is grounded.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::category::QuestionCategory;
use crate::dsl::{
    execute, is_grounded, normalize, parse_program_value, parse_programs, validate, ExecError, ExecErrorKind,
    ExecTrace, FormatPolicy, Program,
};
use crate::gateway::{
    build_request, call, extract_json, GatewayError, ImagePayload, ModelGateway, PromptPayload, RequestOptions, Stage,
};
use crate::sample::Sample;
use crate::table::{table_json_from_html, RoleKeywordConfig, TableJson};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableSource {
    #[default]
    ImageModel,
    OracleHtml,
}

impl std::str::FromStr for TableSource {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "image-model" => Ok(TableSource::ImageModel),
            "oracle-html" => Ok(TableSource::OracleHtml),
            _ => Err(format!("unknown table source {s:?} (expected image-model or oracle-html)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub max_repair_rounds: u32,
    /// When false only the direct branch runs.
    pub routing: bool,
    pub table_source: TableSource,
    pub format: FormatPolicy,
    /// Feed gold categories as planner hints instead of predicted ones.
    pub hints_from_gold: bool,
    pub request: RequestOptions,
    pub role_keywords: RoleKeywordConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            max_repair_rounds: 1,
            routing: true,
            table_source: TableSource::ImageModel,
            format: FormatPolicy::default(),
            hints_from_gold: false,
            request: RequestOptions::default(),
            role_keywords: RoleKeywordConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("sample {0} has no questions")]
    NoQuestions(String),
    #[error("config: {0}")]
    Config(String),
}

/// Wall-clock seconds per stage. `tsr_serialize` covers the TSR call (if any)
/// plus sanitize/parse/serialize.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub direct_qa: f64,
    pub tsr_serialize: f64,
    pub route: f64,
    pub plan: f64,
    pub execute: f64,
    pub repair: f64,
}

impl StageTimings {
    pub fn as_map(&self) -> BTreeMap<&'static str, f64> {
        BTreeMap::from([
            ("direct_qa", self.direct_qa),
            ("tsr_serialize", self.tsr_serialize),
            ("route", self.route),
            ("plan", self.plan),
            ("execute", self.execute),
            ("repair", self.repair),
        ])
    }

    pub fn total(&self) -> f64 {
        self.as_map().values().sum()
    }

    pub fn add(&mut self, other: &StageTimings) {
        self.direct_qa += other.direct_qa;
        self.tsr_serialize += other.tsr_serialize;
        self.route += other.route;
        self.plan += other.plan;
        self.execute += other.execute;
        self.repair += other.repair;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ExecOutcome {
    Success { answer: String, grounded: bool },
    Failed { error: ExecError },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub sample_id: String,
    pub qid: usize,
    pub question: String,
    pub gold_category: QuestionCategory,
    pub gold_answer: String,
    pub baseline: String,
    pub predicted_category: Option<QuestionCategory>,
    pub routed: bool,
    pub program: Option<Value>,
    pub exec_outcome: Option<ExecOutcome>,
    pub trace: Option<ExecTrace>,
    pub repair_rounds: u32,
    #[serde(rename = "final")]
    pub final_answer: String,
    pub overridden: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub sample_id: String,
    pub questions: Vec<QuestionRecord>,
    pub stage_timings: StageTimings,
    pub elapsed: f64,
}

/// Override rule: take the executed answer only when it succeeded, is
/// non-empty and grounded.
pub fn decide_override(baseline: &str, outcome: Option<&ExecOutcome>) -> (String, bool) {
    match outcome {
        Some(ExecOutcome::Success { answer, grounded: true }) if !answer.trim().is_empty() => (answer.clone(), true),
        _ => (baseline.to_string(), false),
    }
}

struct Stopwatch(Instant);

impl Stopwatch {
    fn start() -> Self {
        Stopwatch(Instant::now())
    }
    fn secs(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

fn json_strings(reply: &str, key: &str, n: usize) -> Option<Vec<String>> {
    let v = extract_json(reply)?;
    let items = match &v {
        Value::Object(m) => m.get(key)?.as_array()?.clone(),
        Value::Array(items) => items.clone(),
        _ => return None,
    };
    if items.len() != n {
        return None;
    }
    Some(
        items
            .into_iter()
            .map(|x| match x {
                Value::String(s) => s,
                Value::Null => String::new(),
                other => other.to_string(),
            })
            .collect(),
    )
}

/// Inputs of one repair call.
pub struct RepairInput<'a> {
    pub table: &'a TableJson,
    pub qid: usize,
    pub category: QuestionCategory,
    pub question: &'a str,
    pub error: &'a ExecError,
    pub trace: Option<&'a ExecTrace>,
}

fn repair_error_text(input: &RepairInput) -> String {
    match input.trace {
        Some(t) => format!("{}; trace: {}", input.error, t.summary()),
        None => input.error.to_string(),
    }
}

fn repair_once(
    input: &RepairInput,
    gateway: &dyn ModelGateway,
    opts: &RequestOptions,
) -> Result<Result<Program, ExecError>, GatewayError> {
    let payload = PromptPayload {
        table_json: Some(input.table.to_prompt_json()),
        qid: Some(input.qid),
        category: Some(input.category.to_string()),
        question: Some(input.question.to_string()),
        error: Some(repair_error_text(input)),
        ..Default::default()
    };
    let reply = call(gateway, &build_request(Stage::Repair, &payload, opts)?)?;
    let Some(value) = extract_json(&reply) else {
        return Ok(Err(ExecError::bad_shape("repair reply contains no JSON object")));
    };
    let program = match parse_program_value(&value, Some(input.qid)) {
        Ok(mut p) => {
            p.qid = input.qid;
            p
        }
        Err(e) => return Ok(Err(e)),
    };
    Ok(validate(&program, input.table).map(|_| program))
}

/// One repair round. Returns `None` without calling the model when the
/// round budget is spent, and `None` when the reply does not yield a valid program.
pub fn repair(
    input: &RepairInput,
    gateway: &dyn ModelGateway,
    opts: &RequestOptions,
    rounds_used: u32,
    max_rounds: u32,
) -> Result<Option<Program>, GatewayError> {
    if rounds_used >= max_rounds {
        return Ok(None);
    }
    Ok(repair_once(input, gateway, opts)?.ok())
}

fn table_for(sample: &Sample, html: &str, cfg: &PipelineConfig, use_gold_roles: bool) -> TableJson {
    let (_, mut table) = table_json_from_html(html, &cfg.role_keywords);
    if let (true, Some(roles)) = (use_gold_roles, &sample.row_roles) {
        if roles.len() == table.rows.len() {
            for (row, role) in table.rows.iter_mut().zip(roles) {
                row.role = *role;
            }
        } else {
            tracing::warn!(sample = %sample.id, "row_roles length does not match body rows; using detected roles");
        }
    }
    table
}

fn image_of(sample: &Sample) -> Option<ImagePayload> {
    let path = sample.image_path.as_ref()?;
    match ImagePayload::from_file(path) {
        Ok(img) => Some(img),
        Err(e) => {
            tracing::warn!(sample = %sample.id, path = %path.display(), error = %e, "image unreadable");
            None
        }
    }
}

struct Attempt {
    program: Option<Program>,
    outcome: ExecOutcome,
    trace: Option<ExecTrace>,
}

fn run_program(
    program: &Program,
    category: QuestionCategory,
    table: &TableJson,
    fmt: &FormatPolicy,
    timings: &mut StageTimings,
) -> Attempt {
    let sw = Stopwatch::start();
    let attempt = match validate(program, table) {
        Err(error) => Attempt { program: Some(program.clone()), outcome: ExecOutcome::Failed { error }, trace: None },
        Ok(()) => {
            let normalized = normalize(program, category);
            let trace = execute(&normalized, table, fmt);
            let outcome = match trace.answer() {
                Ok(answer) => ExecOutcome::Success { answer: answer.to_string(), grounded: is_grounded(answer, &trace, table) },
                Err(error) => ExecOutcome::Failed { error: error.clone() },
            };
            Attempt { program: Some(normalized), outcome, trace: Some(trace) }
        }
    };
    timings.execute += sw.secs();
    attempt
}

/// Runs all stages for one sample. Gateway failures abort the sample;
/// program failures only ever fall back to the baseline answer.
pub fn run_pipeline(
    sample: &Sample,
    gateway: &dyn ModelGateway,
    cfg: &PipelineConfig,
) -> Result<PipelineResult, PipelineError> {
    let total = Stopwatch::start();
    if sample.questions.is_empty() {
        return Err(PipelineError::NoQuestions(sample.id.clone()));
    }
    let n = sample.questions.len();
    let mut timings = StageTimings::default();
    let questions: Vec<(usize, String)> = sample.questions.iter().map(|q| (q.qid, q.text.clone())).collect();
    let oracle = cfg.table_source == TableSource::OracleHtml;

    // Direct branch.
    let sw = Stopwatch::start();
    let payload = PromptPayload {
        questions: questions.clone(),
        table_html: oracle.then(|| sample.gt_html.clone()),
        image: if oracle { None } else { image_of(sample) },
        ..Default::default()
    };
    let reply = call(gateway, &build_request(Stage::DirectQa, &payload, &cfg.request)?)?;
    let baselines = json_strings(&reply, "answers", n).unwrap_or_else(|| {
        tracing::warn!(sample = %sample.id, "direct answers missing or miscounted; baselines left empty");
        vec![String::new(); n]
    });
    timings.direct_qa += sw.secs();

    let mut records: Vec<QuestionRecord> = sample
        .questions
        .iter()
        .zip(&baselines)
        .map(|(q, b)| QuestionRecord {
            sample_id: sample.id.clone(),
            qid: q.qid,
            question: q.text.clone(),
            gold_category: q.gold_category,
            gold_answer: q.gold_answer.clone(),
            baseline: b.clone(),
            predicted_category: None,
            routed: false,
            program: None,
            exec_outcome: None,
            trace: None,
            repair_rounds: 0,
            final_answer: b.clone(),
            overridden: false,
        })
        .collect();

    if cfg.routing {
        let sw = Stopwatch::start();
        let payload = PromptPayload { questions: questions.clone(), ..Default::default() };
        let reply = call(gateway, &build_request(Stage::Route, &payload, &cfg.request)?)?;
        let predicted: Vec<QuestionCategory> = json_strings(&reply, "categories", n)
            .map(|labels| labels.iter().map(|l| QuestionCategory::parse_lenient(l)).collect())
            .unwrap_or_else(|| vec![QuestionCategory::Other; n]);
        timings.route += sw.secs();
        for (r, p) in records.iter_mut().zip(&predicted) {
            r.predicted_category = Some(*p);
            r.routed = p.is_arithmetic();
        }
        let routed: Vec<usize> = (0..n).filter(|&i| records[i].routed).collect();
        if !routed.is_empty() {
            program_branch(sample, gateway, cfg, &routed, &mut records, &mut timings)?;
        }
    }

    for r in &mut records {
        let (final_answer, overridden) = decide_override(&r.baseline, r.exec_outcome.as_ref());
        r.final_answer = final_answer;
        r.overridden = overridden;
    }
    Ok(PipelineResult { sample_id: sample.id.clone(), questions: records, stage_timings: timings, elapsed: total.secs() })
}

fn program_branch(
    sample: &Sample,
    gateway: &dyn ModelGateway,
    cfg: &PipelineConfig,
    routed: &[usize],
    records: &mut [QuestionRecord],
    timings: &mut StageTimings,
) -> Result<(), PipelineError> {
    let oracle = cfg.table_source == TableSource::OracleHtml;
    let sw = Stopwatch::start();
    let table = if oracle {
        table_for(sample, &sample.gt_html, cfg, true)
    } else {
        let payload = PromptPayload { image: image_of(sample), ..Default::default() };
        let html = call(gateway, &build_request(Stage::Tsr, &payload, &cfg.request)?)?;
        table_for(sample, &html, cfg, false)
    };
    timings.tsr_serialize += sw.secs();

    let sw = Stopwatch::start();
    let payload = PromptPayload {
        questions: routed.iter().map(|&i| (records[i].qid, records[i].question.clone())).collect(),
        table_json: Some(table.to_prompt_json()),
        category_hints: Some(
            routed
                .iter()
                .map(|&i| {
                    let r = &records[i];
                    let c = if cfg.hints_from_gold { r.gold_category } else { r.predicted_category.unwrap_or(QuestionCategory::Other) };
                    c.to_string()
                })
                .collect(),
        ),
        ..Default::default()
    };
    let reply = call(gateway, &build_request(Stage::Plan, &payload, &cfg.request)?)?;
    let parsed = parse_programs(&reply);
    timings.plan += sw.secs();

    for &i in routed {
        let record = &mut records[i];
        let category = record.predicted_category.unwrap_or(QuestionCategory::Other);
        let initial: Result<Program, ExecError> = match &parsed {
            Err(e) => Err(ExecError::new(ExecErrorKind::BadShape, e.to_string())),
            Ok(list) => match list.iter().find(|p| p.qid == record.qid) {
                Some(p) => p.program.clone(),
                None => Err(ExecError::new(
                    ExecErrorKind::BadShape,
                    format!("planner returned no program for qid {}", record.qid),
                )),
            },
        };
        let mut attempt = match initial {
            Ok(p) => run_program(&p, category, &table, &cfg.format, timings),
            Err(error) => Attempt { program: None, outcome: ExecOutcome::Failed { error }, trace: None },
        };
        let mut rounds = 0;
        while let ExecOutcome::Failed { error } = &attempt.outcome {
            if rounds >= cfg.max_repair_rounds {
                break;
            }
            rounds += 1;
            let sw = Stopwatch::start();
            let input = RepairInput {
                table: &table,
                qid: record.qid,
                category,
                question: &record.question,
                error,
                trace: attempt.trace.as_ref(),
            };
            let repaired = repair_once(&input, gateway, &cfg.request)?;
            timings.repair += sw.secs();
            attempt = match repaired {
                Ok(p) => run_program(&p, category, &table, &cfg.format, timings),
                Err(error) => Attempt { program: attempt.program.take(), outcome: ExecOutcome::Failed { error }, trace: None },
            };
        }
        record.repair_rounds = rounds;
        record.program = attempt.program.as_ref().map(Program::to_json);
        record.exec_outcome = Some(attempt.outcome);
        record.trace = attempt.trace;
    }
    Ok(())
}
