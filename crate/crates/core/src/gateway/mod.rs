//! Chat-model access: prompt assembly, transports (HTTP and scripted), and
//! client-side stop-string truncation.

mod http;
mod prompts;
mod scripted;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use crate::jsonx::extract_json;
pub use http::{HttpGateway, HttpGatewayConfig};
pub use prompts::{build_request, render, PromptPayload, RequestOptions, DEFAULT_STOP_STRINGS};
pub use scripted::{FnGateway, ScriptEntry, ScriptedGateway};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Tsr,
    DirectQa,
    Route,
    Plan,
    Repair,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Tsr, Stage::DirectQa, Stage::Route, Stage::Plan, Stage::Repair];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Tsr => "tsr",
            Stage::DirectQa => "direct_qa",
            Stage::Route => "route",
            Stage::Plan => "plan",
            Stage::Repair => "repair",
        }
    }

    pub fn max_new_tokens(self) -> u32 {
        match self {
            Stage::Tsr => 4096,
            Stage::DirectQa | Stage::Route | Stage::Plan => 1024,
            Stage::Repair => 512,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImagePayload {
    pub bytes: Vec<u8>,
    pub mime: String,
}

impl ImagePayload {
    pub fn from_file(path: &std::path::Path) -> std::io::Result<Self> {
        let bytes = std::fs::read(path)?;
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
        let mime = match ext.as_str() {
            "jpg" | "jpeg" => "image/jpeg",
            "webp" => "image/webp",
            "gif" => "image/gif",
            _ => "image/png",
        };
        Ok(ImagePayload { bytes, mime: mime.to_string() })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decoding {
    pub temperature: f64,
    pub top_p: f64,
    pub repetition_penalty: f64,
    pub max_new_tokens: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChatRequest {
    pub stage: Stage,
    /// Empty when the system text was merged into `user`.
    pub system: String,
    pub user: String,
    pub image: Option<ImagePayload>,
    pub decoding: Decoding,
    pub stop_strings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum GatewayError {
    #[error("model unavailable: {0}")]
    ModelUnavailable(String),
    #[error("script exhausted for stage {stage}")]
    ScriptExhausted { stage: Stage },
    #[error("prompt slot {0} has no value")]
    MissingSlot(String),
    #[error("invalid gateway configuration: {0}")]
    Config(String),
}

/// A chat model. Implementations return the raw completion text.
pub trait ModelGateway: Send + Sync {
    fn complete(&self, req: &ChatRequest) -> Result<String, GatewayError>;

    /// Scripted gateways consume replies in order; callers keep runs serial
    /// to stay deterministic.
    fn requires_serial(&self) -> bool {
        false
    }
}

/// Cuts `reply` at the earliest stop string. A code fence stops at its
/// closing occurrence, so a fenced reply keeps its body.
pub fn truncate_at_stops(reply: &str, stops: &[String]) -> String {
    let cut = stops
        .iter()
        .filter(|s| !s.is_empty())
        .filter_map(|s| {
            if s == "```" {
                reply.match_indices("```").nth(1).map(|(i, _)| i)
            } else {
                reply.find(s.as_str())
            }
        })
        .min();
    match cut {
        Some(i) => reply[..i].to_string(),
        None => reply.to_string(),
    }
}

/// Sends a request and applies client-side stop truncation.
pub fn call(gateway: &dyn ModelGateway, req: &ChatRequest) -> Result<String, GatewayError> {
    let raw = gateway.complete(req)?;
    Ok(truncate_at_stops(&raw, &req.stop_strings))
}
