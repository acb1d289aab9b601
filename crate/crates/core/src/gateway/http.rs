use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{ChatRequest, GatewayError, ModelGateway};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpGatewayConfig {
    /// Full chat-completions URL, e.g. `http://localhost:8000/v1/chat/completions`.
    pub url: String,
    pub model: String,
    /// Name of the environment variable holding a bearer token, if any.
    pub api_key_env: Option<String>,
    pub max_retries: u32,
    pub backoff_ms: u64,
    pub timeout_secs: u64,
    pub max_in_flight: usize,
}

impl Default for HttpGatewayConfig {
    fn default() -> Self {
        HttpGatewayConfig {
            url: "http://localhost:8000/v1/chat/completions".into(),
            model: "default".into(),
            api_key_env: None,
            max_retries: 3,
            backoff_ms: 500,
            timeout_secs: 600,
            max_in_flight: 4,
        }
    }
}

struct Permits {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Permits);

impl Permits {
    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().expect("permit lock");
        while *free == 0 {
            free = self.cv.wait(free).expect("permit lock");
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("permit lock") += 1;
        self.0.cv.notify_one();
    }
}

enum Attempt {
    Done(String),
    Retry(String),
    Fatal(String),
}

/// OpenAI-style chat-completions client with bounded concurrency and
/// retry with exponential backoff on 5xx, 429 and transport errors.
pub struct HttpGateway {
    cfg: HttpGatewayConfig,
    agent: ureq::Agent,
    token: Option<String>,
    permits: Permits,
    retries: AtomicU64,
}

impl HttpGateway {
    pub fn new(cfg: HttpGatewayConfig) -> Result<Self, GatewayError> {
        let token = match &cfg.api_key_env {
            Some(var) => Some(
                std::env::var(var).map_err(|_| GatewayError::Config(format!("environment variable {var} is not set")))?,
            ),
            None => None,
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(cfg.timeout_secs)))
            .build()
            .into();
        let permits = Permits { free: Mutex::new(cfg.max_in_flight.max(1)), cv: Condvar::new() };
        Ok(HttpGateway { cfg, agent, token, permits, retries: AtomicU64::new(0) })
    }

    /// Number of retried attempts since construction.
    pub fn retries(&self) -> u64 {
        self.retries.load(Ordering::Relaxed)
    }

    fn body(&self, req: &ChatRequest) -> Value {
        let mut content = vec![json!({"type": "text", "text": req.user})];
        if let Some(img) = &req.image {
            let data = base64::engine::general_purpose::STANDARD.encode(&img.bytes);
            content.push(json!({"type": "image_url", "image_url": {"url": format!("data:{};base64,{data}", img.mime)}}));
        }
        let mut messages = Vec::new();
        if !req.system.is_empty() {
            messages.push(json!({"role": "system", "content": req.system}));
        }
        messages.push(json!({"role": "user", "content": content}));
        json!({
            "model": self.cfg.model,
            "messages": messages,
            "temperature": req.decoding.temperature,
            "top_p": req.decoding.top_p,
            "repetition_penalty": req.decoding.repetition_penalty,
            "max_tokens": req.decoding.max_new_tokens,
            "stop": req.stop_strings,
        })
    }

    fn attempt(&self, body: &str) -> Attempt {
        let mut request = self.agent.post(&self.cfg.url).header("Content-Type", "application/json");
        if let Some(token) = &self.token {
            request = request.header("Authorization", format!("Bearer {token}"));
        }
        let mut resp = match request.send(body) {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        let status = resp.status().as_u16();
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        match status {
            200..=299 => {
                let parsed: Result<Value, _> = serde_json::from_str(&text);
                match parsed.ok().as_ref().and_then(|v| v["choices"][0]["message"]["content"].as_str()) {
                    Some(content) => Attempt::Done(content.to_string()),
                    None => Attempt::Fatal(format!("unexpected response body: {text}")),
                }
            }
            429 | 500..=599 => Attempt::Retry(format!("HTTP {status}")),
            _ => Attempt::Fatal(format!("HTTP {status}: {text}")),
        }
    }
}

impl ModelGateway for HttpGateway {
    fn complete(&self, req: &ChatRequest) -> Result<String, GatewayError> {
        let body = self.body(req).to_string();
        let _permit = self.permits.acquire();
        let mut delay = Duration::from_millis(self.cfg.backoff_ms);
        let mut attempt = 0;
        loop {
            match self.attempt(&body) {
                Attempt::Done(text) => return Ok(text),
                Attempt::Fatal(msg) => return Err(GatewayError::ModelUnavailable(msg)),
                Attempt::Retry(msg) if attempt < self.cfg.max_retries => {
                    attempt += 1;
                    self.retries.fetch_add(1, Ordering::Relaxed);
                    tracing::warn!(stage = %req.stage, attempt, error = %msg, "retrying model call");
                    std::thread::sleep(delay);
                    delay *= 2;
                }
                Attempt::Retry(msg) => {
                    return Err(GatewayError::ModelUnavailable(format!("{msg} after {attempt} retries")))
                }
            }
        }
    }
}
