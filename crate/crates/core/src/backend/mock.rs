use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Deserialize;

use super::{Backend, BackendError, FinishReason, GenerationOutcome, GenerationRequest, TokenLogprob};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScriptEntry {
    text: String,
    #[serde(default)]
    token_logprobs: Option<Vec<f64>>,
    /// Optional text pieces, parallel to `token_logprobs`.
    #[serde(default)]
    tokens: Option<Vec<String>>,
    #[serde(default = "default_finish")]
    finish: FinishReason,
}

fn default_finish() -> FinishReason {
    FinishReason::Stop
}

/// Plays back a fixed list of outcomes, one per `generate` call.
#[derive(Debug)]
pub struct ScriptedBackend {
    queue: Mutex<VecDeque<GenerationOutcome>>,
    calls: AtomicUsize,
}

impl ScriptedBackend {
    pub fn new(outcomes: Vec<GenerationOutcome>) -> Result<Self, BackendError> {
        if outcomes.is_empty() {
            return Err(BackendError::Script("empty script".into()));
        }
        for (i, o) in outcomes.iter().enumerate() {
            o.check().map_err(|m| BackendError::Script(format!("entry {i}: {m}")))?;
        }
        Ok(ScriptedBackend {
            queue: Mutex::new(outcomes.into()),
            calls: AtomicUsize::new(0),
        })
    }

    /// Loads a script: a JSON array of `{"text", "token_logprobs", "finish"}`.
    pub fn from_script(text: &str) -> Result<Self, BackendError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| BackendError::Script(e.to_string()))?;
        Self::from_value(value)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self, BackendError> {
        let entries: Vec<ScriptEntry> =
            serde_json::from_value(value).map_err(|e| BackendError::Script(e.to_string()))?;
        let mut outcomes = Vec::with_capacity(entries.len());
        for (i, e) in entries.into_iter().enumerate() {
            let tokens = match (e.token_logprobs, e.tokens) {
                (None, None) => None,
                (None, Some(_)) => {
                    return Err(BackendError::Script(format!(
                        "entry {i}: tokens without token_logprobs"
                    )))
                }
                (Some(lps), None) => Some(
                    lps.into_iter()
                        .map(|logprob| TokenLogprob { text: None, logprob })
                        .collect(),
                ),
                (Some(lps), Some(pieces)) => {
                    if lps.len() != pieces.len() {
                        return Err(BackendError::Script(format!(
                            "entry {i}: {} logprobs for {} tokens",
                            lps.len(),
                            pieces.len()
                        )));
                    }
                    Some(
                        pieces
                            .into_iter()
                            .zip(lps)
                            .map(|(t, logprob)| TokenLogprob { text: Some(t), logprob })
                            .collect(),
                    )
                }
            };
            let tokens = if e.finish == FinishReason::Error {
                Some(Vec::new())
            } else {
                tokens
            };
            outcomes.push(GenerationOutcome {
                raw_text: e.text,
                tokens,
                finish: e.finish,
            });
        }
        Self::new(outcomes)
    }

    /// Number of `generate` calls served or refused so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn remaining(&self) -> usize {
        self.queue.lock().expect("script queue poisoned").len()
    }
}

impl Backend for ScriptedBackend {
    fn generate(&self, req: &GenerationRequest) -> Result<GenerationOutcome, BackendError> {
        req.check()?;
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.queue
            .lock()
            .expect("script queue poisoned")
            .pop_front()
            .ok_or(BackendError::ScriptExhausted)
    }

    fn name(&self) -> &str {
        "mock"
    }
}
