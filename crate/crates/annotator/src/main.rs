use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Context;
use clap::Parser;
use tabrouter_annotator::{router, AppState};
use tracing_subscriber::EnvFilter;

/// Annotation and trace-inspection service.
#[derive(Parser, Debug)]
#[command(name = "tabrouter-annotator", version)]
struct Args {
    /// JSON-Lines manifest providing the pre-annotations.
    #[arg(long)]
    manifest: PathBuf,
    /// Where saved annotations go (default: `annotations/` next to the manifest).
    #[arg(long)]
    annotations_dir: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();
    let args = Args::parse();
    let state = AppState::from_manifest(&args.manifest, args.annotations_dir)
        .with_context(|| format!("loading {}", args.manifest.display()))?;
    let listener = tokio::net::TcpListener::bind(args.bind).await.with_context(|| format!("binding {}", args.bind))?;
    tracing::info!(addr = %args.bind, "listening");
    axum::serve(listener, router(Arc::new(state))).await?;
    Ok(())
}
