//! End-to-end checks shared by the acceptance target and the focused tests.
//! Each returns a short detail line on success and the first violation on failure.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_bigint::BigInt;
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use super::dsl_oracle::{evaluate, read_number, OracleValue};
use super::gen::{all_layouts, grid_from_layout, random_grid, random_program, random_tree, retext};
use super::grits_oracle::brute_force_similarity;
use super::tree_oracle::brute_force_distance;
use tabrouter::bench::{
    generate_fixtures, load_manifest, perfect_script, run_command, run_samples, CommandKind, GatewaySpec, RunArgs,
    SynthConfig, SynthFixture,
};
use tabrouter::category::QuestionCategory;
use tabrouter::dsl::{execute, normalize, FormatPolicy, Outcome};
use tabrouter::gateway::{FnGateway, ScriptEntry, ScriptedGateway, Stage};
use tabrouter::metrics::{
    adjacency_f1, grits_top, relative_rects, teds, tree_edit_distance, CostModel,
};
use tabrouter::money::{format_decimal, parse_amount, Convention, Decimal};
use tabrouter::pipeline::{run_pipeline, ExecOutcome, PipelineConfig, PipelineResult, TableSource};
use tabrouter::sample::{Question, Sample};
use tabrouter::scoring::{aggregate, AggregateOptions};

pub type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// Fresh scratch directory under the system temp dir.
pub fn scratch(name: &str) -> PathBuf {
    let nanos = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).unwrap().as_nanos();
    let dir = std::env::temp_dir().join(format!("tabrouter-{name}-{}-{nanos}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn oracle_cfg() -> PipelineConfig {
    PipelineConfig { table_source: TableSource::OracleHtml, ..Default::default() }
}

pub fn invoice_sample() -> Sample {
    let manifest = load_manifest(&fixture_dir().join("invoice/manifest.jsonl")).expect("fixture manifest");
    manifest.samples.into_iter().next().expect("one sample")
}

pub fn invoice_result() -> PipelineResult {
    let gw = ScriptedGateway::from_file(&fixture_dir().join("invoice/script.json")).expect("fixture script");
    run_pipeline(&invoice_sample(), &gw, &oracle_cfg()).expect("scripted run")
}

pub fn invoice_golden() -> Check {
    let t0 = Instant::now();
    let res = invoice_result();
    let secs = t0.elapsed().as_secs_f64();
    let q1 = &res.questions[0];
    ensure(q1.baseline == "180,00", || format!("baseline {:?}", q1.baseline))?;
    ensure(q1.final_answer == "90,00" && q1.overridden, || format!("final {:?} overridden {}", q1.final_answer, q1.overridden))?;
    let trace = q1.trace.as_ref().ok_or("no trace")?;
    let exclude = trace.steps.iter().find(|s| s.op["op"] == "EXCLUDE_ROLES").ok_or("no exclusion step in trace")?;
    // Body row 3 is the subtotal.
    ensure(exclude.rows_in.contains(&3) && !exclude.rows_out.contains(&3), || format!("{exclude:?}"))?;
    ensure(trace.contributing_cells.iter().all(|c| c.row != 3), || "subtotal cell contributed".into())?;
    let q2 = &res.questions[1];
    ensure(q2.final_answer == "50,00" && !q2.overridden && !q2.routed, || format!("{q2:?}"))?;
    ensure(secs < 1.0, || format!("took {secs:.3}s"))?;
    Ok(format!("180,00 -> 90,00 with subtotal row excluded, {:.1} ms", secs * 1e3))
}

pub fn dsl_oracle_suite() -> Check {
    let t0 = Instant::now();
    let fixtures: Vec<SynthFixture> =
        generate_fixtures(&SynthConfig { n_samples: 1000, seed: 2024, ..Default::default() }).map_err(|e| e.to_string())?;
    let mut seen = std::collections::BTreeSet::new();
    let (mut starred, mut canonical, mut random) = (0, 0, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let fmt = FormatPolicy::default();
    for f in &fixtures {
        for (q, p) in f.sample.questions.iter().zip(&f.programs) {
            seen.insert(q.gold_category);
            let p = normalize(p, q.gold_category);
            let trace = execute(&p, &f.table, &fmt);
            let got = trace.answer().map_err(|e| format!("{}: canonical program failed: {e}", f.sample.id))?;
            if q.gold_category.is_arithmetic() {
                ensure(got == q.gold_answer, || format!("{} q{}: {got} vs gold {}", f.sample.id, q.qid, q.gold_answer))?;
                starred += 1;
            }
            agree(&p, f, got)?;
            canonical += 1;
        }
        for qid in 1..=5 {
            let p = random_program(&mut rng, &f.table, qid);
            let trace = execute(&p, &f.table, &fmt);
            match (evaluate(&p, &f.table), &trace.outcome) {
                (Ok(_), Outcome::Value(v)) => agree(&p, f, v)?,
                (Err(kind), Outcome::Error(e)) => {
                    ensure(e.kind.as_str() == kind, || format!("{}: {p:?}: {e} vs {kind}", f.sample.id))?
                }
                (want, got) => return Err(format!("{}: {p:?}: reference {want:?}, executor {got:?}", f.sample.id)),
            }
            random += 1;
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    ensure(seen.len() == 11, || format!("only {} categories generated", seen.len()))?;
    ensure(secs < 60.0, || format!("took {secs:.1}s"))?;
    Ok(format!("{starred} starred gold, {canonical} canonical + {random} random programs vs reference, {secs:.1}s"))
}

fn agree(p: &tabrouter::dsl::Program, f: &SynthFixture, got: &str) -> Result<(), String> {
    let ok = match evaluate(p, &f.table) {
        Ok(OracleValue::Number(v)) => read_number(got) == Some(v),
        Ok(OracleValue::Count(n)) => got == n.to_string(),
        Ok(OracleValue::Text(t)) => got == t,
        Err(_) => false,
    };
    ensure(ok, || format!("{}: {p:?}: executor {got:?}, reference {:?}", f.sample.id, evaluate(p, &f.table)))
}

const VALID_PLAN: &str = r#"{"programs":[{"qid":1,"ops":[{"op":"SUM","col":"Honoraires"}]}]}"#;

fn plan_with(ops: Value) -> String {
    json!({ "programs": [{ "qid": 1, "ops": ops }] }).to_string()
}

/// A planner reply that should never yield a usable program.
pub fn malformed_plan(rng: &mut impl RngCore) -> String {
    let sum = json!({"op": "SUM", "col": "Honoraires"});
    let reply = match rng.gen_range(0..11) {
        0 => {
            let alphabet: Vec<char> = "{}[]\":,abcOPSUM0123 \n\\".chars().collect();
            (0..rng.gen_range(0..80)).map(|_| *alphabet.choose(rng).unwrap()).collect()
        }
        1 => VALID_PLAN[..rng.gen_range(0..VALID_PLAN.len() - 3)].to_string(),
        2 => {
            let op = ["MEDIAN", "AVG", "SUMM", "DELETE_ROWS", "", "sum_all", "EXEC"].choose(rng).unwrap();
            plan_with(json!([{ "op": op, "col": "Honoraires" }]))
        }
        3 => {
            let col = ["honoraires", "HONORAIRES", "Honoraire", "Montant", "", "Acte | Honoraires"].choose(rng).unwrap();
            plan_with(json!([{ "op": "SUM", "col": col }]))
        }
        4 => json!({ "programs": [{ "qid": rng.gen_range(2..100), "ops": [sum] }] }).to_string(),
        5 => [
            r#"{"programs": {}}"#,
            r#"{"programs": [{"qid": 1, "ops": "SUM"}]}"#,
            r#"{"programs": [{"qid": 1, "ops": []}]}"#,
            r#"{"programs": [null]}"#,
            r#"{"programs": [{"qid": "one", "ops": 7}]}"#,
            r#"{"plans": 1}"#,
            "null",
            "[]",
        ]
        .choose(rng)
        .unwrap()
        .to_string(),
        6 => plan_with(json!([sum, {"op": "EXCLUDE_ROLES", "roles": ["total"]}])),
        7 => [
            plan_with(json!([{"op": "KTH_ROW", "k": 0, "target_col": "Honoraires"}])),
            plan_with(json!([{"op": "KTH_ROW", "k": -3, "target_col": "Honoraires"}])),
            plan_with(json!([{"op": "KTH_ROW", "k": 1e308, "target_col": "Honoraires"}])),
            plan_with(json!([{"op": "DIFF", "a": {"op": "ARGMAX", "col": "Honoraires"}, "b": sum}])),
            plan_with(json!([{"op": "DIFF", "a": sum}])),
            plan_with(json!([{"op": "DIFF", "a": {"op": "DIFF", "a": sum, "b": sum}, "b": sum}])),
        ]
        .choose(rng)
        .unwrap()
        .clone(),
        8 => [
            plan_with(json!([{"op": "SUM", "col": "Acte"}])),
            plan_with(json!([{"op": "FILTER_EQ", "col": "Acte", "value": "Couronne"}, sum])),
            plan_with(json!([{"op": "KEEP_ROLES", "roles": ["total"]}, sum])),
        ]
        .choose(rng)
        .unwrap()
        .clone(),
        9 => {
            let mut v = json!({"op": "SUM", "col": "Honoraires"});
            for _ in 0..rng.gen_range(20..200) {
                v = json!({ "op": "DIFF", "a": v, "b": {"op": "COUNT", "col": "Acte"} });
            }
            plan_with(json!([v]))
        }
        _ => "Voici le programme : SUM(Honoraires) \u{1F600} \u{0000}".to_string(),
    };
    if rng.gen_bool(0.2) {
        format!("```json\n{reply}\n```")
    } else {
        reply
    }
}

#[derive(Debug, Default)]
pub struct FuzzTally {
    pub cases: usize,
    pub failures: usize,
    pub accepted: usize,
    pub crashes: usize,
    pub repairs: usize,
}

/// Runs the invoice question against `n` fuzzed planner outputs (and fuzzed
/// repairs), checking the baseline survives every failed execution.
pub fn fallback_fuzz(n: usize) -> Result<FuzzTally, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut sample = invoice_sample();
    sample.questions.truncate(1);
    let mut tally = FuzzTally::default();
    for case in 0..n {
        let plan = malformed_plan(&mut rng);
        let fix = malformed_plan(&mut rng);
        let (p2, f2) = (plan.clone(), fix.clone());
        let gw = FnGateway::new(move |req| {
            Ok(match req.stage {
                Stage::DirectQa => r#"{"answers": ["BASELINE-7"]}"#.to_string(),
                Stage::Route => r#"{"categories": ["aggregation_sum"]}"#.to_string(),
                Stage::Plan => p2.clone(),
                Stage::Repair => f2.clone(),
                Stage::Tsr => String::new(),
            })
        });
        tally.cases += 1;
        let run = catch_unwind(AssertUnwindSafe(|| run_pipeline(&sample, &gw, &oracle_cfg())));
        let res = match run {
            Ok(Ok(res)) => res,
            _ => {
                tally.crashes += 1;
                continue;
            }
        };
        let r = &res.questions[0];
        ensure(r.repair_rounds <= 1, || format!("case {case}: {} repair rounds", r.repair_rounds))?;
        tally.repairs += r.repair_rounds as usize;
        match &r.exec_outcome {
            Some(ExecOutcome::Success { answer, grounded: true }) if !answer.trim().is_empty() => {
                tally.accepted += 1;
                ensure(r.final_answer == *answer, || format!("case {case}: accepted answer not used"))?;
            }
            _ => {
                tally.failures += 1;
                ensure(r.final_answer == "BASELINE-7" && !r.overridden, || {
                    format!("case {case}: final {:?} after failure\nplan {plan}\nrepair {fix}", r.final_answer)
                })?;
            }
        }
    }
    ensure(tally.crashes == 0, || format!("{} crashes", tally.crashes))?;
    Ok(tally)
}

pub fn fallback_safety() -> Check {
    let t = fallback_fuzz(500)?;
    Ok(format!(
        "{} cases: {} failed and kept the baseline, {} recovered, {} repair calls, 0 crashes",
        t.cases, t.failures, t.accepted, t.repairs
    ))
}

pub fn tree_edit_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut compared = 0;
    for i in 0..200 {
        let (a, b) = (random_tree(&mut rng, 8), random_tree(&mut rng, 8));
        for model in [CostModel::Structure, CostModel::Content] {
            let (fast, slow) = (tree_edit_distance(&a, &b, model), brute_force_distance(&a, &b, model));
            ensure(fast == slow, || format!("pair {i} {model:?}: {fast} vs exhaustive {slow}\n{a:?}\n{b:?}"))?;
            compared += 1;
        }
    }
    for i in 0..500 {
        let g = random_grid(&mut rng);
        let html = g.to_html();
        let self_teds = teds(&html, &html, false).map_err(|e| e.to_string())?.value;
        ensure(self_teds == 1.0, || format!("table {i}: TEDS(x,x) = {self_teds}"))?;
        let other = retext(&g, &mut rng).to_html();
        let s = teds(&other, &html, true).map_err(|e| e.to_string())?.value;
        ensure(s == 1.0, || format!("table {i}: S-TEDS changed with text: {s}"))?;
    }
    Ok(format!("{compared} exact distances on 200 pairs, TEDS self = S-TEDS text-invariance = 1 on 500 tables"))
}

pub fn adjacency_grits() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let grids: Vec<_> = (0..500).map(|_| random_grid(&mut rng)).collect();
    for (i, g) in grids.iter().enumerate() {
        let (adj, gr) = (adjacency_f1(g, g).value, grits_top(g, g).value);
        ensure(adj == 1.0 && gr == 1.0, || format!("table {i}: self adjacency {adj}, GriTS {gr}"))?;
        let h = &grids[(i * 7 + 3) % grids.len()];
        for v in [adjacency_f1(g, h).value, grits_top(g, h).value] {
            ensure((0.0..=1.0).contains(&v), || format!("table {i}: score {v} out of range"))?;
        }
    }
    let mut small = Vec::new();
    for (r, c) in [(2, 2), (2, 3)] {
        small.extend(all_layouts(r, c).iter().map(|l| grid_from_layout(r, c, l)));
    }
    let mut worst = 0.0f64;
    for a in &small {
        for b in &small {
            let (ra, rb) = (relative_rects(a), relative_rects(b));
            let n = (a.n_rows * a.n_cols + b.n_rows * b.n_cols) as f64;
            let want = 2.0 * brute_force_similarity(&ra, &rb) / n;
            let got = grits_top(a, b).value;
            worst = worst.max((got - want).abs());
            ensure((got - want).abs() <= 1e-9, || format!("{ra:?} vs {rb:?}: {got} vs exhaustive {want}"))?;
        }
    }
    Ok(format!("self = 1 on 500 tables, {} small-grid pairs within {worst:.1e}", small.len() * small.len()))
}

pub fn exact_decimal() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let cents: Vec<i64> = (0..10_000).map(|_| rng.gen_range(-1_000_000..=1_000_000)).collect();
    let texts: Vec<String> = cents
        .iter()
        .map(|c| {
            let a = c.unsigned_abs();
            format!("{}{},{:02}", if *c < 0 { "-" } else { "" }, a / 100, a % 100)
        })
        .collect();
    let expected = Decimal::new(BigInt::from(cents.iter().sum::<i64>()), 2);
    let mut order: Vec<usize> = (0..texts.len()).collect();
    let mut rendered = None;
    for round in 0..10 {
        order.shuffle(&mut rng);
        let mut total = Decimal::zero();
        for &i in &order {
            total = &total + &parse_amount(&texts[i]).ok_or_else(|| format!("unparsed {}", texts[i]))?.value;
        }
        ensure(total == expected, || format!("order {round}: {total} vs {expected}"))?;
        let s = format_decimal(&total, Convention::CommaDecimal, 2);
        if let Some(prev) = &rendered {
            ensure(*prev == s, || format!("order {round}: {s} vs {prev}"))?;
        }
        rendered = Some(s);
    }
    let tenth = parse_amount("0,10").ok_or("0,10 unparsed")?.value;
    let three = format_decimal(&(&(&tenth + &tenth) + &tenth), Convention::CommaDecimal, 2);
    ensure(three == "0,30", || format!("0,10 x3 = {three}"))?;
    Ok(format!("10 shuffled sums of 10000 amounts = {}, 0,10 x3 = {three}", rendered.unwrap()))
}

fn synth_fixtures(samples: usize, per_sample: usize, seed: u64) -> Vec<SynthFixture> {
    let cfg = SynthConfig { n_samples: samples, questions_per_sample: per_sample, seed, ..Default::default() };
    generate_fixtures(&cfg).expect("feasible config")
}

pub fn throughput() -> Check {
    let fixtures = synth_fixtures(20, 5, 707);
    let samples: Vec<Sample> = fixtures.iter().map(|f| f.sample.clone()).collect();
    let gw = ScriptedGateway::new(perfect_script(&fixtures, TableSource::OracleHtml));
    let results: Vec<PipelineResult> =
        run_samples(&samples, &gw, &oracle_cfg(), 1).into_iter().collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    let report = aggregate(&results, &AggregateOptions::default(), None).map_err(|e| e.to_string())?;
    let t = &report.throughput;
    ensure(t.questions == 100, || format!("{} questions", t.questions))?;
    let qps = t.qps.ok_or("no qps")?;
    let product = qps * t.total_runtime;
    // One timer tick relative to the run.
    let tol = 100.0 * 1e-9 / t.total_runtime;
    ensure((product - 100.0).abs() <= tol.max(1e-9), || format!("qps x total = {product}"))?;
    let sum: f64 = t.stage_fractions.values().sum();
    ensure((sum - 1.0).abs() <= 0.01, || format!("stage fractions sum to {sum}"))?;
    let elapsed: f64 = results.iter().map(|r| r.elapsed).sum();
    ensure(elapsed == t.total_runtime, || "total runtime is not the sum of per-sample time".into())?;
    Ok(format!("qps {qps:.1} x total {:.4}s = {product:.6}, fractions sum {sum:.4}", t.total_runtime))
}

/// A different category on the same side of the arithmetic split, so the
/// rest of the scripted run is unaffected.
fn confusable(c: QuestionCategory) -> QuestionCategory {
    let same: Vec<QuestionCategory> = QuestionCategory::labelled().filter(|x| x.is_arithmetic() == c.is_arithmetic()).collect();
    let i = same.iter().position(|x| *x == c).unwrap();
    same[(i + 1) % same.len()]
}

pub fn routing() -> Check {
    let fixtures = synth_fixtures(20, 5, 808);
    let samples: Vec<Sample> = fixtures.iter().map(|f| f.sample.clone()).collect();
    let mut script = perfect_script(&fixtures, TableSource::OracleHtml);
    let mut injected: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut position = 0usize;
    let mut route_entries = script.iter_mut().filter(|e| e.stage == Stage::Route);
    for f in &fixtures {
        let entry: &mut ScriptEntry = route_entries.next().ok_or("missing route entry")?;
        let cats: Vec<String> = f
            .sample
            .questions
            .iter()
            .map(|q: &Question| {
                position += 1;
                let c = if position % 10 == 3 {
                    let wrong = confusable(q.gold_category);
                    *injected.entry((q.gold_category.index(), wrong.index())).or_default() += 1;
                    wrong
                } else {
                    q.gold_category
                };
                c.as_str().to_string()
            })
            .collect();
        entry.reply = json!({ "categories": cats }).to_string();
    }
    let gw = ScriptedGateway::new(script);
    let results: Vec<PipelineResult> =
        run_samples(&samples, &gw, &oracle_cfg(), 1).into_iter().collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    let report = aggregate(&results, &AggregateOptions::default(), None).map_err(|e| e.to_string())?;
    ensure(report.n == 100, || format!("{} questions", report.n))?;
    let acc = report.route_acc.ok_or("no RouteAcc")?;
    ensure((acc - 90.0).abs() < 1e-9, || format!("RouteAcc {acc}"))?;
    let c = &report.confusion;
    let injected_total: u64 = injected.values().sum();
    ensure(c.off_diagonal() == injected_total && injected_total == 10, || {
        format!("off-diagonal {} vs injected {injected_total}", c.off_diagonal())
    })?;
    for (i, row) in c.counts.iter().enumerate() {
        for (j, &n) in row.iter().enumerate() {
            if i != j {
                let want = injected.get(&(i, j)).copied().unwrap_or(0);
                ensure(n == want, || format!("cell ({i},{j}) = {n}, injected {want}"))?;
            }
        }
    }
    Ok(format!("RouteAcc {acc:.1}, off-diagonal {} = injected errors", c.off_diagonal()))
}

pub fn vqa_oracle_perfect() -> Check {
    let dir = scratch("oracle");
    let synth = RunArgs { out: dir.join("synth"), n_samples: Some(200), seed: Some(909), ..Default::default() };
    run_command(CommandKind::GenSynth, &synth).map_err(|e| e.to_string())?;
    let args = RunArgs {
        manifest: Some(dir.join("synth/manifest.jsonl")),
        gateway: Some(GatewaySpec::Scripted(dir.join("synth/script.oracle.json"))),
        out: dir.join("run"),
        workers: 1,
        ..Default::default()
    };
    let summary = run_command(CommandKind::VqaOracle, &args).map_err(|e| e.to_string())?;
    let report = summary.report.ok_or("no report")?;
    let mut parts = Vec::new();
    for s in report.per_category.iter().filter(|s| s.category.is_arithmetic()) {
        ensure(s.n > 0 && s.exact_match == 100.0, || format!("{}: {}/{} = {}%", s.category, s.correct, s.n, s.exact_match))?;
        parts.push(format!("{} {}/{}", s.category.short_label(), s.correct, s.n));
    }
    ensure(parts.len() == 4, || format!("only {} starred categories scored", parts.len()))?;
    let _ = std::fs::remove_dir_all(&dir);
    Ok(parts.join(", "))
}
