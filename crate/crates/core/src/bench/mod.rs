//! Dataset ingestion, synthetic fixtures and the benchmark commands.

mod manifest;
mod run;
mod stats;
mod synth;

pub use manifest::{load_manifest, manifest_jsonl, LineIssue, Manifest, ManifestError};
pub use run::{
    open_gateway, run_command, run_samples, write_error_record, BenchError, CommandKind, ErrorRecord, GatewaySpec,
    RunArgs, RunSummary, SampleFailure, TsrSampleScore,
};
pub use stats::{corpus_stats, median, CorpusStats};
pub use synth::{generate_fixtures, generate_synthetic, perfect_script, InfeasibleConfig, SynthConfig, SynthFixture};
