//! Completion providers.
//!
//! Everything that talks to a language model goes through
//! [`CompletionProvider::complete`]. [`ChatCompletionsProvider`] speaks the
//! common chat-completions HTTP dialect; [`MockProvider`] is a scriptable,
//! offline stand-in that records every payload it would have sent.

use std::collections::VecDeque;
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::Semaphore;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProviderError {
    #[error("provider timed out after {0:?}")]
    Timeout(Duration),
    #[error("provider rejected credentials (HTTP {0})")]
    Auth(u16),
    #[error("provider returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("provider transport error: {0}")]
    Transport(String),
    #[error("malformed provider reply: {0}")]
    Malformed(String),
    #[error("hint withheld: no answer-free hint could be produced")]
    Withheld,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    Hint,
    Grade,
}

/// One model call: a system message, a user message and a sampling temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub purpose: Purpose,
    pub system: String,
    pub user: String,
    pub temperature: f32,
}

impl CompletionRequest {
    /// Exact JSON body sent to a chat-completions endpoint.
    pub fn wire_payload(&self, model: &str) -> serde_json::Value {
        let mut body = json!({
            "model": model,
            "temperature": self.temperature,
            "messages": [
                { "role": "system", "content": self.system },
                { "role": "user", "content": self.user },
            ],
        });
        if self.purpose == Purpose::Grade {
            body["response_format"] = json!({ "type": "json_object" });
        }
        body
    }
}

#[async_trait]
pub trait CompletionProvider: Send + Sync {
    /// Short label recorded on results (`"mock"`, the model name, ...).
    fn label(&self) -> &str;

    async fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub base_url: String,
    pub model: String,
    pub api_key: String,
    pub temperature: f32,
    pub timeout: Duration,
    pub max_in_flight: usize,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-4o".into(),
            api_key: String::new(),
            temperature: super::DEFAULT_TEMPERATURE,
            timeout: Duration::from_secs(30),
            max_in_flight: 8,
        }
    }
}

pub struct ChatCompletionsProvider {
    client: reqwest::Client,
    endpoint: String,
    model: String,
    api_key: String,
}

impl ChatCompletionsProvider {
    pub fn new(config: &ProviderConfig) -> Result<Self, ProviderError> {
        let client = reqwest::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        Ok(Self {
            client,
            endpoint: format!("{}/chat/completions", config.base_url.trim_end_matches('/')),
            model: config.model.clone(),
            api_key: config.api_key.clone(),
        })
    }
}

#[derive(Deserialize)]
struct ChatReply {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: Option<String>,
}

#[async_trait]
impl CompletionProvider for ChatCompletionsProvider {
    fn label(&self) -> &str {
        &self.model
    }

    async fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        let response = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&request.wire_payload(&self.model))
            .send()
            .await
            .map_err(|e| {
                if e.is_timeout() {
                    ProviderError::Timeout(Duration::ZERO)
                } else {
                    ProviderError::Transport(e.to_string())
                }
            })?;
        let status = response.status().as_u16();
        if status == 401 || status == 403 {
            return Err(ProviderError::Auth(status));
        }
        if !response.status().is_success() {
            let body = response.text().await.unwrap_or_default();
            return Err(ProviderError::Http {
                status,
                body: body.chars().take(500).collect(),
            });
        }
        let reply: ChatReply = response
            .json()
            .await
            .map_err(|e| ProviderError::Malformed(e.to_string()))?;
        reply
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .filter(|c| !c.trim().is_empty())
            .ok_or_else(|| ProviderError::Malformed("reply has no message content".into()))
    }
}

/// Caps concurrent calls to the inner provider and bounds each call's duration.
pub struct BoundedProvider {
    inner: Arc<dyn CompletionProvider>,
    permits: Semaphore,
    timeout: Duration,
}

impl BoundedProvider {
    pub fn new(
        inner: Arc<dyn CompletionProvider>,
        max_in_flight: usize,
        timeout: Duration,
    ) -> Self {
        Self {
            inner,
            permits: Semaphore::new(max_in_flight.max(1)),
            timeout,
        }
    }
}

#[async_trait]
impl CompletionProvider for BoundedProvider {
    fn label(&self) -> &str {
        self.inner.label()
    }

    async fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        let _permit = self
            .permits
            .acquire()
            .await
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        match tokio::time::timeout(self.timeout, self.inner.complete(request)).await {
            Ok(result) => result.map_err(|e| match e {
                ProviderError::Timeout(_) => ProviderError::Timeout(self.timeout),
                other => other,
            }),
            Err(_) => Err(ProviderError::Timeout(self.timeout)),
        }
    }
}

type Responder = dyn Fn(&CompletionRequest) -> Result<String, ProviderError> + Send + Sync;

/// Deterministic offline provider.
///
/// Replies come from a queue of scripted responses first, then from a
/// responder function. The default responder returns a fixed Socratic hint
/// for hint requests and, for grading requests, a verdict computed by
/// comparing the normalized student answer with the reference answer found in
/// the prompt.
pub struct MockProvider {
    script: Mutex<VecDeque<Result<String, ProviderError>>>,
    responder: Box<Responder>,
    log: Mutex<Vec<CompletionRequest>>,
}

pub const MOCK_HINT: &str = "Which principle governs this situation? Re-read the question \
and ask yourself which assumption in your last answer might not hold.";

impl Default for MockProvider {
    fn default() -> Self {
        Self::with_responder(default_mock_reply)
    }
}

impl MockProvider {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_responder(
        f: impl Fn(&CompletionRequest) -> Result<String, ProviderError> + Send + Sync + 'static,
    ) -> Self {
        Self {
            script: Mutex::new(VecDeque::new()),
            responder: Box::new(f),
            log: Mutex::new(Vec::new()),
        }
    }

    /// Queues a reply consumed by the next call, ahead of the responder.
    pub fn push_reply(&self, reply: impl Into<String>) {
        self.script.lock().push_back(Ok(reply.into()));
    }

    pub fn push_error(&self, err: ProviderError) {
        self.script.lock().push_back(Err(err));
    }

    /// Every request received so far, in order.
    pub fn requests(&self) -> Vec<CompletionRequest> {
        self.log.lock().clone()
    }

    /// The JSON bodies a real chat-completions client would have sent.
    pub fn wire_payloads(&self, model: &str) -> Vec<String> {
        self.log
            .lock()
            .iter()
            .map(|r| r.wire_payload(model).to_string())
            .collect()
    }
}

#[async_trait]
impl CompletionProvider for MockProvider {
    fn label(&self) -> &str {
        "mock"
    }

    async fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        self.log.lock().push(request.clone());
        let scripted = self.script.lock().pop_front();
        match scripted {
            Some(reply) => reply,
            None => (self.responder)(request),
        }
    }
}

fn default_mock_reply(request: &CompletionRequest) -> Result<String, ProviderError> {
    match request.purpose {
        Purpose::Hint => Ok(MOCK_HINT.to_string()),
        Purpose::Grade => {
            let reference =
                super::prompt::section_body(&request.user, "REFERENCE_ANSWER").unwrap_or_default();
            let answer =
                super::prompt::section_body(&request.user, "STUDENT_ANSWER").unwrap_or_default();
            let norm = |s: &str| {
                s.split_whitespace()
                    .collect::<Vec<_>>()
                    .join(" ")
                    .to_lowercase()
            };
            let (reference, answer) = (norm(&reference), norm(&answer));
            let correct = !reference.is_empty() && answer.contains(&reference);
            let verdict = if correct {
                json!({ "correct": true, "explanation": "Matches the reference answer.", "misconception_label": null })
            } else {
                json!({
                    "correct": false,
                    "explanation": "The response does not state the key idea of the reference answer.",
                    "misconception_label": null,
                })
            };
            Ok(verdict.to_string())
        }
    }
}
