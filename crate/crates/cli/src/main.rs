use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use tabrouter::bench::{run_command, write_error_record, CommandKind, GatewaySpec, RunArgs};
use tabrouter::category::QuestionCategory;
use tabrouter::pipeline::TableSource;
use tracing_subscriber::EnvFilter;

/// Table routing benchmark harness.
#[derive(Parser, Debug)]
#[command(name = "tabrouter", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Score predicted HTML files against the manifest ground truth.
    TsrEval,
    /// Answer every question directly (no routing).
    VqaDirect,
    /// Full pipeline with the ground-truth HTML as table input.
    VqaOracle,
    /// Full router pipeline.
    Pipeline,
    /// Write a synthetic manifest and matching scripted gateways.
    GenSynth,
    /// Corpus statistics for a manifest.
    Stats,
}

impl From<Command> for CommandKind {
    fn from(c: Command) -> Self {
        match c {
            Command::TsrEval => CommandKind::TsrEval,
            Command::VqaDirect => CommandKind::VqaDirect,
            Command::VqaOracle => CommandKind::VqaOracle,
            Command::Pipeline => CommandKind::Pipeline,
            Command::GenSynth => CommandKind::GenSynth,
            Command::Stats => CommandKind::Stats,
        }
    }
}

#[derive(Args, Debug)]
struct Flags {
    /// JSON-Lines manifest of samples.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// `http:URL` or `scripted:FILE`.
    #[arg(long, global = true)]
    gateway: Option<GatewaySpec>,
    /// JSON file with HTTP gateway settings (model, retries, timeouts).
    #[arg(long, global = true)]
    gateway_config: Option<PathBuf>,
    /// JSON file with pipeline settings.
    #[arg(long, global = true)]
    pipeline_config: Option<PathBuf>,
    /// `image-model` or `oracle-html`.
    #[arg(long, global = true)]
    table_source: Option<TableSource>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Comma-separated category labels to keep.
    #[arg(long, global = true, value_delimiter = ',')]
    categories: Option<Vec<QuestionCategory>>,
    #[arg(long, global = true)]
    max_repair_rounds: Option<u32>,
    #[arg(long, global = true, default_value_t = 4)]
    workers: usize,
    /// Directory of `{id}.html` predictions for tsr-eval.
    #[arg(long, global = true)]
    pred_dir: Option<PathBuf>,
    /// JSON synthetic-corpus settings for gen-synth.
    #[arg(long, global = true)]
    synth_config: Option<PathBuf>,
    #[arg(long, global = true)]
    n_samples: Option<usize>,
    /// `report.json` of a baseline run, for per-category deltas.
    #[arg(long, global = true)]
    baseline_report: Option<PathBuf>,
}

impl From<Flags> for RunArgs {
    fn from(f: Flags) -> Self {
        RunArgs {
            manifest: f.manifest,
            gateway: f.gateway,
            gateway_config: f.gateway_config,
            pipeline_config: f.pipeline_config,
            table_source: f.table_source,
            out: f.out,
            seed: f.seed,
            categories: f.categories,
            max_repair_rounds: f.max_repair_rounds,
            workers: f.workers,
            pred_dir: f.pred_dir,
            synth_config: f.synth_config,
            n_samples: f.n_samples,
            baseline_report: f.baseline_report,
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let kind = CommandKind::from(cli.command);
    let args = RunArgs::from(cli.flags);
    match run_command(kind, &args) {
        Ok(summary) => {
            print!("{}", summary.text);
            for f in &summary.files {
                tracing::info!(file = %f.display(), "wrote");
            }
            Ok(ExitCode::SUCCESS)
        }
        Err(err) => {
            write_error_record(&args.out, &err);
            eprintln!("error [{}]: {err}", err.code());
            Ok(ExitCode::FAILURE)
        }
    }
}

fn main() -> anyhow::Result<ExitCode> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    run(Cli::parse()).context("tabrouter failed")
}
