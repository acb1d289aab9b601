mod common;

use common::scenarios::{self, invoice_result, invoice_sample, fixture_dir, scratch};
use tabrouter::bench::{run_command, CommandKind, GatewaySpec, RunArgs};
use tabrouter::dsl::ExecErrorKind;
use tabrouter::gateway::{GatewayError, ScriptEntry, ScriptedGateway, Stage};
use tabrouter::pipeline::{run_pipeline, ExecOutcome, PipelineConfig, PipelineError, TableSource};

fn oracle() -> PipelineConfig {
    PipelineConfig { table_source: TableSource::OracleHtml, ..Default::default() }
}

const DIRECT: &str = r#"{"answers": ["180,00", "50,00"]}"#;
const ROUTE: &str = r#"{"categories": ["aggregation_sum", "lookup_by_header"]}"#;

fn program(col: &str) -> String {
    format!(r#"{{"qid": 1, "ops": [{{"op": "SUM", "col": "{col}"}}]}}"#)
}

fn plan(col: &str) -> String {
    format!(r#"{{"programs": [{}]}}"#, program(col))
}

#[test]
fn invoice_scenario() {
    let res = invoice_result();
    let q1 = &res.questions[0];
    assert_eq!((q1.final_answer.as_str(), q1.overridden), ("90,00", true));
    assert_eq!(q1.predicted_category, Some(tabrouter::category::QuestionCategory::AggregationSum));
    let ops: Vec<&str> = q1.program.as_ref().unwrap()["ops"].as_array().unwrap().iter().map(|o| o["op"].as_str().unwrap()).collect();
    assert_eq!(ops, ["EXCLUDE_ROLES", "SUM"]);
    assert_eq!(res.questions[1].final_answer, "50,00");
    assert!(scenarios::invoice_golden().is_ok());
}

#[test]
fn repair_fixes_header_case() {
    let gw = ScriptedGateway::new(vec![
        ScriptEntry::new(Stage::DirectQa, DIRECT),
        ScriptEntry::new(Stage::Route, ROUTE),
        ScriptEntry::new(Stage::Plan, plan("honoraires")),
        ScriptEntry::new(Stage::Repair, program("Honoraires")).matching("UnknownHeader"),
    ]);
    let res = run_pipeline(&invoice_sample(), &gw, &oracle()).unwrap();
    let q1 = &res.questions[0];
    assert_eq!(q1.repair_rounds, 1);
    assert_eq!(q1.final_answer, "90,00");
    assert_eq!(gw.call_count(Stage::Repair), 1);
}

#[test]
fn one_repair_round_then_baseline() {
    let gw = ScriptedGateway::new(vec![
        ScriptEntry::new(Stage::DirectQa, DIRECT),
        ScriptEntry::new(Stage::Route, ROUTE),
        ScriptEntry::new(Stage::Plan, plan("honoraires")),
        ScriptEntry::new(Stage::Repair, program("HONORAIRES")).repeating(),
    ]);
    let res = run_pipeline(&invoice_sample(), &gw, &oracle()).unwrap();
    let q1 = &res.questions[0];
    assert_eq!(q1.repair_rounds, 1);
    assert_eq!(gw.call_count(Stage::Repair), 1);
    assert_eq!((q1.final_answer.as_str(), q1.overridden), ("180,00", false));
    match &q1.exec_outcome {
        Some(ExecOutcome::Failed { error }) => assert_eq!(error.kind, ExecErrorKind::UnknownHeader),
        other => panic!("{other:?}"),
    }
}

#[test]
fn zero_repair_rounds_never_calls_repair() {
    let gw = ScriptedGateway::new(vec![
        ScriptEntry::new(Stage::DirectQa, DIRECT),
        ScriptEntry::new(Stage::Route, ROUTE),
        ScriptEntry::new(Stage::Plan, plan("honoraires")),
    ]);
    let cfg = PipelineConfig { max_repair_rounds: 0, ..oracle() };
    let res = run_pipeline(&invoice_sample(), &gw, &cfg).unwrap();
    assert_eq!(res.questions[0].final_answer, "180,00");
    assert_eq!(gw.call_count(Stage::Repair), 0);
}

#[test]
fn image_mode_calls_tsr_and_parses_its_html() {
    let html = std::fs::read_to_string(fixture_dir().join("invoice/table.html")).unwrap();
    let gw = ScriptedGateway::new(vec![
        ScriptEntry::new(Stage::DirectQa, DIRECT),
        ScriptEntry::new(Stage::Route, ROUTE),
        ScriptEntry::new(Stage::Tsr, format!("```html\n{html}\n```")),
        ScriptEntry::new(Stage::Plan, plan("Honoraires")),
    ]);
    let res = run_pipeline(&invoice_sample(), &gw, &PipelineConfig::default()).unwrap();
    assert_eq!(res.questions[0].final_answer, "90,00");
    assert_eq!(gw.calls(), [Stage::DirectQa, Stage::Route, Stage::Tsr, Stage::Plan]);
}

#[test]
fn routing_off_is_direct_only() {
    let gw = ScriptedGateway::new(vec![ScriptEntry::new(Stage::DirectQa, DIRECT)]);
    let cfg = PipelineConfig { routing: false, ..oracle() };
    let res = run_pipeline(&invoice_sample(), &gw, &cfg).unwrap();
    assert_eq!(res.questions[0].final_answer, "180,00");
    assert_eq!(gw.calls(), [Stage::DirectQa]);
}

#[test]
fn gateway_failure_aborts_the_sample() {
    // Script runs out after the direct answers.
    let gw = ScriptedGateway::new(vec![ScriptEntry::new(Stage::DirectQa, DIRECT)]);
    let err = run_pipeline(&invoice_sample(), &gw, &oracle()).unwrap_err();
    assert!(matches!(err, PipelineError::Gateway(GatewayError::ScriptExhausted { .. })), "{err:?}");
}

#[test]
fn miscounted_direct_answers_leave_empty_baselines() {
    let gw = ScriptedGateway::new(vec![
        ScriptEntry::new(Stage::DirectQa, r#"{"answers": ["only one"]}"#),
        ScriptEntry::new(Stage::Route, r#"{"categories": ["other", "other"]}"#),
    ]);
    let res = run_pipeline(&invoice_sample(), &gw, &oracle()).unwrap();
    assert!(res.questions.iter().all(|q| q.final_answer.is_empty()));
}

#[test]
fn fuzzed_plans_keep_the_baseline() {
    let tally = scenarios::fallback_fuzz(200).unwrap();
    assert_eq!(tally.crashes, 0);
    assert_eq!(tally.failures + tally.accepted, 200);
}

#[test]
fn cli_pipeline_on_the_invoice_fixture() {
    let out = scratch("invoice-cli");
    let args = RunArgs {
        manifest: Some(fixture_dir().join("invoice/manifest.jsonl")),
        gateway: Some(GatewaySpec::Scripted(fixture_dir().join("invoice/script.json"))),
        table_source: Some(TableSource::OracleHtml),
        out: out.clone(),
        workers: 1,
        ..Default::default()
    };
    let summary = run_command(CommandKind::Pipeline, &args).unwrap();
    let report = summary.report.unwrap();
    assert_eq!(report.overall, 100.0);
    let records = std::fs::read_to_string(out.join("records.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(records.lines().next().unwrap()).unwrap();
    assert_eq!(first["final"], "90,00");
    assert_eq!(first["overridden"], true);
    for f in ["report.json", "report.txt", "confusion.csv", "timings.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    std::fs::remove_dir_all(out).unwrap();
}
