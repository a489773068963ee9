//! Contract to a text-generation backend that returns completion text and
//! per-token log-probabilities.

use serde::{Deserialize, Serialize};

mod http;
mod mock;

pub use http::{HttpBackend, ENV_BACKEND_KEY, ENV_BACKEND_URL};
pub use mock::ScriptedBackend;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: String,
    pub max_output_tokens: u32,
    pub temperature: f64,
    pub stop_sequences: Vec<String>,
}

impl GenerationRequest {
    pub fn new(prompt: impl Into<String>) -> Self {
        GenerationRequest {
            prompt: prompt.into(),
            max_output_tokens: 256,
            temperature: 0.0,
            stop_sequences: Vec::new(),
        }
    }

    pub fn check(&self) -> Result<(), BackendError> {
        if self.prompt.is_empty() {
            return Err(BackendError::InvalidRequest("prompt is empty".into()));
        }
        if self.max_output_tokens == 0 {
            return Err(BackendError::InvalidRequest(
                "max_output_tokens must be at least 1".into(),
            ));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(BackendError::InvalidRequest(format!(
                "temperature must be non-negative, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLogprob {
    /// Text piece of the token, when the backend reports it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    pub logprob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinishReason {
    Stop,
    Length,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationOutcome {
    pub raw_text: String,
    /// `None` means the backend supplied no log-probabilities.
    pub tokens: Option<Vec<TokenLogprob>>,
    pub finish: FinishReason,
}

impl GenerationOutcome {
    pub fn logprobs(&self) -> Option<Vec<f64>> {
        self.tokens.as_ref().map(|t| t.iter().map(|t| t.logprob).collect())
    }

    /// Checks the log-probability bound and, when every token carries its
    /// text, that the pieces concatenate to `raw_text`.
    pub fn check(&self) -> Result<(), String> {
        let Some(tokens) = &self.tokens else {
            return Ok(());
        };
        if let Some((i, t)) = tokens
            .iter()
            .enumerate()
            .find(|(_, t)| t.logprob.is_nan() || t.logprob > 0.0)
        {
            return Err(format!("token {i} has logprob {} (must be <= 0)", t.logprob));
        }
        if self.finish == FinishReason::Error && !tokens.is_empty() {
            return Err("an error outcome carries tokens".into());
        }
        if !tokens.is_empty() && tokens.iter().all(|t| t.text.is_some()) {
            let joined: String = tokens.iter().filter_map(|t| t.text.as_deref()).collect();
            if joined != self.raw_text {
                return Err("token pieces do not concatenate to the text".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("backend returned status {status}: {message}")]
    Api { status: u16, message: String },
    #[error("request timed out: {0}")]
    Timeout(String),
    #[error("invalid backend response: {0}")]
    InvalidResponse(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("invalid script: {0}")]
    Script(String),
    #[error("script exhausted")]
    ScriptExhausted,
}

impl BackendError {
    /// Whether repeating the same request may succeed.
    pub fn is_retryable(&self) -> bool {
        match self {
            BackendError::Transport(_) | BackendError::Timeout(_) => true,
            BackendError::Api { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }

    /// Failures of the channel to the backend, as opposed to bad input.
    pub fn is_transport(&self) -> bool {
        matches!(
            self,
            BackendError::Transport(_)
                | BackendError::Timeout(_)
                | BackendError::Api { .. }
                | BackendError::InvalidResponse(_)
                | BackendError::ScriptExhausted
        )
    }
}

/// A handle that can serve concurrent `generate` calls.
pub trait Backend: Send + Sync {
    fn generate(&self, req: &GenerationRequest) -> Result<GenerationOutcome, BackendError>;

    fn name(&self) -> &str {
        "backend"
    }
}

impl<B: Backend + ?Sized> Backend for std::sync::Arc<B> {
    fn generate(&self, req: &GenerationRequest) -> Result<GenerationOutcome, BackendError> {
        (**self).generate(req)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}

/// Cuts `outcome` at the first stop sequence in its text. Tokens are
/// trimmed to match when every token carries its text piece.
pub fn truncate_at_stop(outcome: &mut GenerationOutcome, stops: &[String]) {
    let cut = stops
        .iter()
        .filter(|s| !s.is_empty())
        .filter_map(|s| outcome.raw_text.find(s.as_str()))
        .min();
    let Some(cut) = cut else { return };
    outcome.raw_text.truncate(cut);
    outcome.finish = if outcome.finish == FinishReason::Error {
        FinishReason::Error
    } else {
        FinishReason::Stop
    };
    if let Some(tokens) = &mut outcome.tokens {
        if tokens.iter().all(|t| t.text.is_some()) {
            let mut len = 0;
            let mut keep = 0;
            for t in tokens.iter() {
                let piece = t.text.as_deref().unwrap_or_default();
                if len + piece.len() > cut {
                    break;
                }
                len += piece.len();
                keep += 1;
            }
            tokens.truncate(keep);
            outcome.raw_text.truncate(len);
        } else {
            log::debug!("stop sequence cut the text but tokens carry no pieces; keeping all logprobs");
        }
    }
}
