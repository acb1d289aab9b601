use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{ChatRequest, GatewayError, ModelGateway, Stage};

/// One canned reply. `match_text` must occur in the request (system + user)
/// for the entry to apply; `repeat` entries are never consumed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub stage: Stage,
    #[serde(default, rename = "match", skip_serializing_if = "Option::is_none")]
    pub match_text: Option<String>,
    pub reply: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub repeat: bool,
}

impl ScriptEntry {
    pub fn new(stage: Stage, reply: impl Into<String>) -> Self {
        ScriptEntry { stage, match_text: None, reply: reply.into(), repeat: false }
    }

    pub fn matching(mut self, text: impl Into<String>) -> Self {
        self.match_text = Some(text.into());
        self
    }

    pub fn repeating(mut self) -> Self {
        self.repeat = true;
        self
    }
}

struct ScriptState {
    used: Vec<bool>,
    log: Vec<Stage>,
}

/// Offline gateway answering from an ordered script: the first unconsumed
/// entry whose stage and match fit the request wins.
pub struct ScriptedGateway {
    entries: Vec<ScriptEntry>,
    state: Mutex<ScriptState>,
}

impl ScriptedGateway {
    pub fn new(entries: Vec<ScriptEntry>) -> Self {
        let n = entries.len();
        ScriptedGateway { entries, state: Mutex::new(ScriptState { used: vec![false; n], log: Vec::new() }) }
    }

    /// Loads a JSON array of entries.
    pub fn from_file(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?;
        let entries: Vec<ScriptEntry> = serde_json::from_str(&text)
            .map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?;
        Ok(Self::new(entries))
    }

    /// Stages of all requests served so far, in order.
    pub fn calls(&self) -> Vec<Stage> {
        self.state.lock().expect("script lock").log.clone()
    }

    pub fn call_count(&self, stage: Stage) -> usize {
        self.calls().into_iter().filter(|s| *s == stage).count()
    }
}

impl ModelGateway for ScriptedGateway {
    fn complete(&self, req: &ChatRequest) -> Result<String, GatewayError> {
        let mut state = self.state.lock().expect("script lock");
        state.log.push(req.stage);
        let hit = self.entries.iter().enumerate().position(|(i, e)| {
            !state.used[i]
                && e.stage == req.stage
                && e.match_text.as_ref().is_none_or(|m| req.system.contains(m.as_str()) || req.user.contains(m.as_str()))
        });
        match hit {
            Some(i) => {
                if !self.entries[i].repeat {
                    state.used[i] = true;
                }
                Ok(self.entries[i].reply.clone())
            }
            None => Err(GatewayError::ScriptExhausted { stage: req.stage }),
        }
    }

    fn requires_serial(&self) -> bool {
        true
    }
}

type ReplyFn = dyn Fn(&ChatRequest) -> Result<String, GatewayError> + Send + Sync;

/// Gateway backed by a closure; handy for property tests.
pub struct FnGateway {
    f: Box<ReplyFn>,
}

impl FnGateway {
    pub fn new(f: impl Fn(&ChatRequest) -> Result<String, GatewayError> + Send + Sync + 'static) -> Self {
        FnGateway { f: Box::new(f) }
    }
}

impl ModelGateway for FnGateway {
    fn complete(&self, req: &ChatRequest) -> Result<String, GatewayError> {
        (self.f)(req)
    }
}
