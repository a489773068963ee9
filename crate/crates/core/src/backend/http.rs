use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Duration;

use serde_json::{json, Value};

use super::{
    truncate_at_stop, Backend, BackendError, FinishReason, GenerationOutcome, GenerationRequest, TokenLogprob,
};

pub const ENV_BACKEND_URL: &str = "T2S_BACKEND_URL";
pub const ENV_BACKEND_KEY: &str = "T2S_BACKEND_KEY";

/// Client for a completions-style endpoint: `POST {base}/v1/completions`.
pub struct HttpBackend {
    endpoint: String,
    api_key: Option<String>,
    model: Option<String>,
    agent: ureq::Agent,
    warned_no_logprobs: AtomicBool,
}

impl std::fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpBackend")
            .field("endpoint", &self.endpoint)
            .field("model", &self.model)
            .finish_non_exhaustive()
    }
}

impl HttpBackend {
    pub fn new(base_url: &str, api_key: Option<String>, timeout: Duration) -> Result<Self, BackendError> {
        let base = base_url.trim().trim_end_matches('/');
        if !(base.starts_with("http://") || base.starts_with("https://")) {
            return Err(BackendError::Config(format!(
                "backend URL must be http(s), got '{base_url}'"
            )));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(HttpBackend {
            endpoint: format!("{base}/v1/completions"),
            api_key: api_key.filter(|k| !k.is_empty()),
            model: None,
            agent,
            warned_no_logprobs: AtomicBool::new(false),
        })
    }

    /// Reads the URL from `url` or `T2S_BACKEND_URL` and the bearer token
    /// from `T2S_BACKEND_KEY`.
    pub fn from_env(url: Option<&str>, timeout: Duration) -> Result<Self, BackendError> {
        let url = match url {
            Some(u) => u.to_string(),
            None => std::env::var(ENV_BACKEND_URL).map_err(|_| {
                BackendError::Config(format!("no backend URL: pass --backend-url or set {ENV_BACKEND_URL}"))
            })?,
        };
        Self::new(&url, std::env::var(ENV_BACKEND_KEY).ok(), timeout)
    }

    pub fn with_model(mut self, model: Option<String>) -> Self {
        self.model = model;
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

fn map_ureq(e: ureq::Error) -> BackendError {
    match e {
        ureq::Error::Timeout(t) => BackendError::Timeout(t.to_string()),
        ureq::Error::StatusCode(status) => BackendError::Api {
            status,
            message: String::new(),
        },
        other => BackendError::Transport(other.to_string()),
    }
}

/// Decodes `choices[0]` of a completions response.
pub(crate) fn parse_completion(body: &Value) -> Result<GenerationOutcome, BackendError> {
    let bad = |m: &str| BackendError::InvalidResponse(m.to_string());
    let choice = body
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| bad("missing choices[0]"))?;
    let raw_text = choice
        .get("text")
        .and_then(Value::as_str)
        .ok_or_else(|| bad("missing choices[0].text"))?
        .to_string();
    let logprobs = choice.get("logprobs").filter(|v| !v.is_null());
    let tokens = match logprobs.and_then(|l| l.get("token_logprobs")) {
        None | Some(Value::Null) => None,
        Some(Value::Array(items)) => {
            let pieces: Option<Vec<String>> = logprobs
                .and_then(|l| l.get("tokens"))
                .and_then(Value::as_array)
                .filter(|t| t.len() == items.len())
                .map(|t| t.iter().map(|x| x.as_str().unwrap_or_default().to_string()).collect());
            let mut out = Vec::with_capacity(items.len());
            for (i, item) in items.iter().enumerate() {
                // Some servers report null for a token they did not score.
                let Some(lp) = item.as_f64() else { continue };
                // Tolerate float noise just above zero.
                if lp > 1e-6 {
                    return Err(bad(&format!("token {i} has positive logprob {lp}")));
                }
                out.push(TokenLogprob {
                    text: pieces.as_ref().map(|p| p[i].clone()),
                    logprob: lp.min(0.0),
                });
            }
            Some(out)
        }
        Some(_) => return Err(bad("token_logprobs is not an array")),
    };
    let finish = match choice.get("finish_reason").and_then(Value::as_str) {
        Some("length") => FinishReason::Length,
        Some("error") => FinishReason::Error,
        _ => FinishReason::Stop,
    };
    let tokens = if finish == FinishReason::Error {
        Some(Vec::new())
    } else {
        tokens
    };
    Ok(GenerationOutcome {
        raw_text,
        tokens,
        finish,
    })
}

impl Backend for HttpBackend {
    fn generate(&self, req: &GenerationRequest) -> Result<GenerationOutcome, BackendError> {
        req.check()?;
        let mut body = json!({
            "prompt": req.prompt,
            "max_tokens": req.max_output_tokens,
            "temperature": req.temperature,
            "stop": req.stop_sequences,
            "logprobs": true,
        });
        if let Some(m) = &self.model {
            body["model"] = json!(m);
        }
        let mut request = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request.send_json(&body).map_err(map_ureq)?;
        let status = response.status().as_u16();
        let text = response.body_mut().read_to_string().map_err(map_ureq)?;
        if !(200..300).contains(&status) {
            let message: String = text.chars().take(500).collect();
            return Err(BackendError::Api { status, message });
        }
        let value: Value = serde_json::from_str(&text).map_err(|e| BackendError::InvalidResponse(e.to_string()))?;
        let mut outcome = parse_completion(&value)?;
        // Servers differ in whether they honor `stop`; enforce it here too.
        truncate_at_stop(&mut outcome, &req.stop_sequences);
        if outcome.tokens.is_none() && !self.warned_no_logprobs.swap(true, Ordering::Relaxed) {
            log::warn!(
                "backend at {} returned no token logprobs; confidence gating is disabled, validation still applies",
                self.endpoint
            );
        }
        Ok(outcome)
    }

    fn name(&self) -> &str {
        "http"
    }
}
