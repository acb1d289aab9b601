use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::manifest::{load_manifest, manifest_jsonl, LineIssue, ManifestError};
use super::stats::corpus_stats;
use super::synth::{generate_fixtures, perfect_script, InfeasibleConfig, SynthConfig};
use crate::category::QuestionCategory;
use crate::gateway::{GatewayError, HttpGateway, HttpGatewayConfig, ModelGateway, ScriptedGateway};
use crate::metrics::{score_pair, MetricError, TsrScores};
use crate::pipeline::{run_pipeline, PipelineConfig, PipelineError, PipelineResult, TableSource};
use crate::sample::Sample;
use crate::scoring::{aggregate, AggregateOptions, AnswerSource, EvalReport, ScoringError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    TsrEval,
    VqaDirect,
    VqaOracle,
    Pipeline,
    GenSynth,
    Stats,
}

/// `http:URL` or `scripted:FILE`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GatewaySpec {
    Http(String),
    Scripted(PathBuf),
}

impl FromStr for GatewaySpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(url) = s.strip_prefix("http:") {
            // Accept both `http:URL` and a bare `http://...` URL.
            let url = if url.starts_with("//") { s.to_string() } else { url.to_string() };
            Ok(GatewaySpec::Http(url))
        } else if let Some(path) = s.strip_prefix("scripted:") {
            Ok(GatewaySpec::Scripted(PathBuf::from(path)))
        } else if s.starts_with("https:") {
            Ok(GatewaySpec::Http(s.to_string()))
        } else {
            Err(format!("gateway must be http:URL or scripted:FILE, got {s:?}"))
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Synth(#[from] InfeasibleConfig),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error("sample {id}: {source}")]
    Metric { id: String, source: MetricError },
    #[error("missing required flag {0}")]
    MissingArg(&'static str),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config: {0}")]
    Config(String),
}

impl BenchError {
    pub fn code(&self) -> &'static str {
        match self {
            BenchError::Manifest(ManifestError::FileUnreadable { .. }) => "file_unreadable",
            BenchError::Manifest(ManifestError::EmptyManifest(_)) => "empty_manifest",
            BenchError::Synth(_) => "infeasible_config",
            BenchError::Gateway(_) => "gateway",
            BenchError::Pipeline(_) => "pipeline",
            BenchError::Scoring(_) => "missing_gold",
            BenchError::Metric { .. } => "metric",
            BenchError::MissingArg(_) => "missing_argument",
            BenchError::Io { .. } => "io",
            BenchError::Config(_) => "config",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub code: String,
    pub message: String,
}

/// Writes `error.json` into `out` (best effort).
pub fn write_error_record(out: &Path, err: &BenchError) {
    let rec = ErrorRecord { code: err.code().to_string(), message: err.to_string() };
    let _ = std::fs::create_dir_all(out);
    let _ = std::fs::write(out.join("error.json"), serde_json::to_string_pretty(&rec).expect("record serializes"));
}

#[derive(Clone, Debug, Default)]
pub struct RunArgs {
    pub manifest: Option<PathBuf>,
    pub gateway: Option<GatewaySpec>,
    /// JSON [`HttpGatewayConfig`]; its `url` is replaced by the one in `gateway`.
    pub gateway_config: Option<PathBuf>,
    pub pipeline_config: Option<PathBuf>,
    pub table_source: Option<TableSource>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub categories: Option<Vec<QuestionCategory>>,
    pub max_repair_rounds: Option<u32>,
    pub workers: usize,
    /// Directory of predicted `{id}.html` files for `tsr-eval`.
    pub pred_dir: Option<PathBuf>,
    pub synth_config: Option<PathBuf>,
    pub n_samples: Option<usize>,
    /// `report.json` of an earlier run to compute deltas against.
    pub baseline_report: Option<PathBuf>,
}

#[derive(Debug)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub text: String,
    pub report: Option<EvalReport>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampleFailure {
    pub sample_id: String,
    pub error: String,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io { path: path.to_path_buf(), source }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, BenchError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))
}

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self, BenchError> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        Ok(Writer { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn put(&mut self, name: &str, content: impl AsRef<[u8]>) -> Result<(), BenchError> {
        let path = self.dir.join(name);
        std::fs::write(&path, content).map_err(io_err(&path))?;
        self.files.push(path);
        Ok(())
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), BenchError> {
        self.put(name, serde_json::to_string_pretty(value).expect("report serializes") + "\n")
    }
}

pub fn open_gateway(spec: &GatewaySpec, config: Option<&Path>) -> Result<Box<dyn ModelGateway>, BenchError> {
    match spec {
        GatewaySpec::Scripted(path) => Ok(Box::new(ScriptedGateway::from_file(path)?)),
        GatewaySpec::Http(url) => {
            let mut cfg: HttpGatewayConfig = match config {
                Some(p) => read_json(p)?,
                None => HttpGatewayConfig::default(),
            };
            cfg.url = url.clone();
            Ok(Box::new(HttpGateway::new(cfg)?))
        }
    }
}

/// Runs the pipeline over `samples` with a bounded worker pool; results keep
/// the input order. Gateways that need ordered calls get one worker.
pub fn run_samples(
    samples: &[Sample],
    gateway: &dyn ModelGateway,
    cfg: &PipelineConfig,
    workers: usize,
) -> Vec<Result<PipelineResult, PipelineError>> {
    let workers = if gateway.requires_serial() { 1 } else { workers.clamp(1, samples.len().max(1)) };
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<PipelineResult, PipelineError>>>> =
        Mutex::new((0..samples.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= samples.len() {
                    break;
                }
                let r = run_pipeline(&samples[i], gateway, cfg);
                if let Err(e) = &r {
                    tracing::error!(sample = %samples[i].id, error = %e, "sample failed");
                }
                slots.lock().expect("result lock")[i] = Some(r);
            });
        }
    });
    slots.into_inner().expect("result lock").into_iter().map(|r| r.expect("every sample ran")).collect()
}

fn filter_categories(samples: Vec<Sample>, keep: Option<&[QuestionCategory]>) -> Vec<Sample> {
    let Some(keep) = keep else { return samples };
    samples
        .into_iter()
        .filter_map(|mut s| {
            s.questions.retain(|q| keep.contains(&q.gold_category));
            (!s.questions.is_empty()).then_some(s)
        })
        .collect()
}

fn manifest_samples(args: &RunArgs) -> Result<(Vec<Sample>, Vec<LineIssue>), BenchError> {
    let path = args.manifest.as_deref().ok_or(BenchError::MissingArg("--manifest"))?;
    let m = load_manifest(path)?;
    Ok((m.samples, m.issues))
}

#[derive(Serialize)]
struct SampleTiming<'a> {
    sample_id: &'a str,
    elapsed: f64,
    stage_timings: &'a crate::pipeline::StageTimings,
}

fn run_vqa(kind: CommandKind, args: &RunArgs) -> Result<RunSummary, BenchError> {
    let (samples, issues) = manifest_samples(args)?;
    let samples = filter_categories(samples, args.categories.as_deref());
    let mut cfg = match &args.pipeline_config {
        Some(p) => PipelineConfig::from_file(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(r) = args.max_repair_rounds {
        cfg.max_repair_rounds = r;
    }
    if let Some(src) = args.table_source {
        cfg.table_source = src;
    }
    match kind {
        CommandKind::VqaDirect => cfg.routing = false,
        CommandKind::VqaOracle => {
            cfg.routing = true;
            cfg.table_source = TableSource::OracleHtml;
        }
        _ => cfg.routing = true,
    }
    let spec = args.gateway.as_ref().ok_or(BenchError::MissingArg("--gateway"))?;
    let gateway = open_gateway(spec, args.gateway_config.as_deref())?;

    let started = Instant::now();
    let outcomes = run_samples(&samples, gateway.as_ref(), &cfg, args.workers);
    let wall_clock = started.elapsed().as_secs_f64();
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (s, r) in samples.iter().zip(outcomes) {
        match r {
            Ok(r) => results.push(r),
            Err(e) => failures.push(SampleFailure { sample_id: s.id.clone(), error: e.to_string() }),
        }
    }

    let baseline = if let Some(p) = &args.baseline_report {
        let v: serde_json::Value = read_json(p)?;
        let rep = v.get("report").cloned().unwrap_or(v);
        Some(serde_json::from_value::<EvalReport>(rep).map_err(|e| BenchError::Config(format!("{}: {e}", p.display())))?)
    } else if cfg.routing {
        Some(aggregate(&results, &AggregateOptions { answer: AnswerSource::Baseline, ..Default::default() }, None)?)
    } else {
        None
    };
    let report = aggregate(&results, &AggregateOptions::default(), baseline.as_ref())?;

    let mut w = Writer::new(&args.out)?;
    w.json(
        "report.json",
        &json!({
            "command": kind,
            "table_source": cfg.table_source,
            "routing": cfg.routing,
            "report": report,
            "baseline": baseline,
            "wall_clock": wall_clock,
            "failures": failures,
            "manifest_issues": issues,
        }),
    )?;
    let mut text = report.to_text();
    if !failures.is_empty() {
        let _ = writeln!(text, "{} sample(s) failed; see errors.jsonl", failures.len());
    }
    w.put("report.txt", &text)?;
    w.put("confusion.csv", report.confusion.to_csv())?;
    let per_sample: Vec<SampleTiming> = results
        .iter()
        .map(|r| SampleTiming { sample_id: &r.sample_id, elapsed: r.elapsed, stage_timings: &r.stage_timings })
        .collect();
    w.json("timings.json", &json!({ "throughput": report.throughput, "wall_clock": wall_clock, "per_sample": per_sample }))?;
    let mut lines = String::new();
    for q in results.iter().flat_map(|r| &r.questions) {
        lines.push_str(&serde_json::to_string(q).expect("record serializes"));
        lines.push('\n');
    }
    w.put("records.jsonl", lines)?;
    if !failures.is_empty() {
        let lines: String =
            failures.iter().map(|f| serde_json::to_string(f).expect("failure serializes") + "\n").collect();
        w.put("errors.jsonl", lines)?;
    }
    Ok(RunSummary { files: w.files, text, report: Some(report) })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TsrSampleScore {
    pub id: String,
    pub missing_prediction: bool,
    pub scores: TsrScores,
}

fn run_tsr_eval(args: &RunArgs) -> Result<RunSummary, BenchError> {
    let (samples, issues) = manifest_samples(args)?;
    let dir = args.pred_dir.as_deref().ok_or(BenchError::MissingArg("--pred-dir"))?;
    let mut per_sample = Vec::new();
    for s in &samples {
        let path = dir.join(format!("{}.html", s.id));
        let (pred, missing) = match std::fs::read_to_string(&path) {
            Ok(p) => (p, false),
            Err(_) => {
                tracing::warn!(sample = %s.id, path = %path.display(), "no prediction; scored as empty");
                (String::new(), true)
            }
        };
        let scores = score_pair(&pred, &s.gt_html).map_err(|source| BenchError::Metric { id: s.id.clone(), source })?;
        per_sample.push(TsrSampleScore { id: s.id.clone(), missing_prediction: missing, scores });
    }
    let all: Vec<TsrScores> = per_sample.iter().map(|p| p.scores.clone()).collect();
    let mean = TsrScores::mean(&all);
    let mut csv = format!("id,{}\n", TsrScores::COLUMNS.join(","));
    for p in &per_sample {
        let vals: Vec<String> = p.scores.values().iter().map(|v| format!("{v:.6}")).collect();
        let _ = writeln!(csv, "{},{}", p.id, vals.join(","));
    }
    let mut text = String::new();
    if let Some(m) = &mean {
        for (k, v) in TsrScores::COLUMNS.iter().zip(m.values()) {
            let _ = writeln!(text, "{k:<14} {:.2}", 100.0 * v);
        }
    }
    let missing = per_sample.iter().filter(|p| p.missing_prediction).count();
    let _ = writeln!(text, "samples {}  missing predictions {missing}", per_sample.len());
    let mut w = Writer::new(&args.out)?;
    w.json("report.json", &json!({ "command": CommandKind::TsrEval, "mean": mean, "per_sample": per_sample, "manifest_issues": issues }))?;
    w.put("report.txt", &text)?;
    w.put("scores.csv", csv)?;
    Ok(RunSummary { files: w.files, text, report: None })
}

fn run_gen_synth(args: &RunArgs) -> Result<RunSummary, BenchError> {
    let mut cfg: SynthConfig = match &args.synth_config {
        Some(p) => read_json(p)?,
        None => SynthConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(n) = args.n_samples {
        cfg.n_samples = n;
    }
    if let Some(keep) = &args.categories {
        cfg.category_weights.retain(|c, _| keep.contains(c));
    }
    let fixtures = generate_fixtures(&cfg)?;
    let samples: Vec<Sample> = fixtures.iter().map(|f| f.sample.clone()).collect();
    let mut w = Writer::new(&args.out)?;
    w.put("manifest.jsonl", manifest_jsonl(&samples))?;
    w.json("script.oracle.json", &perfect_script(&fixtures, TableSource::OracleHtml))?;
    w.json("script.image.json", &perfect_script(&fixtures, TableSource::ImageModel))?;
    w.json("synth_config.json", &cfg)?;
    let stats = corpus_stats(&samples);
    let text = stats.to_text();
    w.put("report.txt", &text)?;
    Ok(RunSummary { files: w.files, text, report: None })
}

fn run_stats(args: &RunArgs) -> Result<RunSummary, BenchError> {
    let (samples, issues) = manifest_samples(args)?;
    let samples = filter_categories(samples, args.categories.as_deref());
    let stats = corpus_stats(&samples);
    let text = stats.to_text();
    let mut w = Writer::new(&args.out)?;
    w.json("report.json", &json!({ "command": CommandKind::Stats, "stats": stats, "manifest_issues": issues }))?;
    w.put("report.txt", &text)?;
    Ok(RunSummary { files: w.files, text, report: None })
}

pub fn run_command(kind: CommandKind, args: &RunArgs) -> Result<RunSummary, BenchError> {
    match kind {
        CommandKind::TsrEval => run_tsr_eval(args),
        CommandKind::VqaDirect | CommandKind::VqaOracle | CommandKind::Pipeline => run_vqa(kind, args),
        CommandKind::GenSynth => run_gen_synth(args),
        CommandKind::Stats => run_stats(args),
    }
}
