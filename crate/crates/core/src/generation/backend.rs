//! Chat-completion wire types and backends.

use std::hash::Hasher;
use std::time::Duration;

use fnv::FnvHasher;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::prompt::PromptBundle;
use super::{GenerationError, SamplingConfig};
use crate::net::{self, NetError};
use crate::text;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// Request body of the chat-completion wire contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
}

impl ChatRequest {
    pub fn from_bundle(model: &str, bundle: &PromptBundle, sampling: &SamplingConfig) -> Self {
        Self {
            model: model.to_owned(),
            messages: vec![
                ChatMessage {
                    role: "system".into(),
                    content: bundle.system_instructions.clone(),
                },
                ChatMessage {
                    role: "user".into(),
                    content: bundle.user_prompt.clone(),
                },
            ],
            temperature: sampling.temperature,
            top_p: sampling.top_p,
            max_tokens: sampling.max_output_tokens,
            seed: sampling.seed,
        }
    }
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Debug, Deserialize)]
struct ResponseMessage {
    content: String,
}

pub trait ChatBackend: Send + Sync {
    fn name(&self) -> &str;
    fn model(&self) -> &str;
    fn complete(&self, request: &ChatRequest) -> Result<String, GenerationError>;
    fn health(&self) -> Result<(), GenerationError>;
}

/// Serialize the bundle per the wire contract and return the backend text.
pub fn generate(
    backend: &dyn ChatBackend,
    bundle: &PromptBundle,
    sampling: &SamplingConfig,
) -> Result<String, GenerationError> {
    sampling.validate()?;
    backend.complete(&ChatRequest::from_bundle(backend.model(), bundle, sampling))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StubMode {
    /// Echo one or two leading sentences of the first context block.
    Echo,
    /// Always return this text.
    Fixed(String),
    /// Behave like an overloaded server.
    Unavailable,
    /// Reject every request.
    Refuse,
}

/// Deterministic in-process backend for tests and offline operation.
#[derive(Debug, Clone)]
pub struct StubBackend {
    mode: StubMode,
    default_seed: u64,
}

pub const STUB_NO_CONTEXT: &str = "প্রদত্ত তথ্যে এই প্রশ্নের উত্তর পাওয়া যায়নি।";

impl StubBackend {
    pub fn new(default_seed: u64) -> Self {
        Self {
            mode: StubMode::Echo,
            default_seed,
        }
    }

    pub fn with_mode(mut self, mode: StubMode) -> Self {
        self.mode = mode;
        self
    }

    /// Body of context block 1 without its Markdown heading lines.
    fn first_block(prompt: &str) -> Option<String> {
        let start = prompt.find("[1] (")?;
        let body = &prompt[start..];
        let body = &body[body.find('\n')? + 1..];
        let end = body.find("\n\n").unwrap_or(body.len());
        let lines: Vec<&str> = body[..end]
            .lines()
            .filter(|l| !l.trim_start().starts_with('#'))
            .collect();
        Some(lines.join("\n"))
    }

    fn echo(&self, request: &ChatRequest) -> String {
        let mut h = FnvHasher::default();
        for m in &request.messages {
            h.write(m.role.as_bytes());
            h.write(&[0]);
            h.write(m.content.as_bytes());
            h.write(&[0]);
        }
        let seed = request.seed.unwrap_or(self.default_seed) ^ h.finish();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let prompt = request
            .messages
            .iter()
            .rev()
            .find(|m| m.role == "user")
            .map(|m| m.content.as_str())
            .unwrap_or("");
        let Some(block) = Self::first_block(prompt) else {
            return STUB_NO_CONTEXT.into();
        };
        let sentences = text::sentences(&block);
        if sentences.is_empty() {
            return STUB_NO_CONTEXT.into();
        }
        let n = rng.random_range(1..=2).min(sentences.len());
        format!("{} [1]", sentences[..n].join(" "))
    }
}

impl ChatBackend for StubBackend {
    fn name(&self) -> &str {
        "stub"
    }

    fn model(&self) -> &str {
        "stub-echo"
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, GenerationError> {
        match &self.mode {
            StubMode::Echo => Ok(self.echo(request)),
            StubMode::Fixed(s) => Ok(s.clone()),
            StubMode::Unavailable => Err(GenerationError::BackendUnavailable {
                reason: "stub configured as unavailable".into(),
                retry_after: Some(Duration::from_secs(1)),
            }),
            StubMode::Refuse => Err(GenerationError::BackendRefusal {
                status: 400,
                detail: "stub configured to refuse".into(),
            }),
        }
    }

    fn health(&self) -> Result<(), GenerationError> {
        match self.mode {
            StubMode::Unavailable => Err(GenerationError::BackendUnavailable {
                reason: "stub configured as unavailable".into(),
                retry_after: None,
            }),
            _ => Ok(()),
        }
    }
}

/// Backend speaking the chat-completion JSON protocol over HTTP.
pub struct HttpChatBackend {
    endpoint: String,
    model: String,
    agent: ureq::Agent,
}

impl HttpChatBackend {
    pub fn new(endpoint: &str, model: &str, timeout: Duration) -> Self {
        Self {
            endpoint: endpoint.to_owned(),
            model: model.to_owned(),
            agent: net::agent(timeout),
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

impl ChatBackend for HttpChatBackend {
    fn name(&self) -> &str {
        "http"
    }

    fn model(&self) -> &str {
        &self.model
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, GenerationError> {
        let resp = net::post_json(&self.agent, &self.endpoint, request).map_err(|e| match e {
            NetError::Timeout => GenerationError::TimeoutExceeded,
            NetError::Unreachable(reason) => GenerationError::BackendUnavailable {
                reason,
                retry_after: None,
            },
        })?;
        match resp.status {
            200 => {
                let parsed: ChatResponse =
                    serde_json::from_str(&resp.body).map_err(|e| GenerationError::BackendRefusal {
                        status: 200,
                        detail: format!("malformed response: {e}"),
                    })?;
                parsed
                    .choices
                    .into_iter()
                    .next()
                    .map(|c| c.message.content)
                    .ok_or(GenerationError::BackendRefusal {
                        status: 200,
                        detail: "response has no choices".into(),
                    })
            }
            429 | 502 | 503 | 504 => Err(GenerationError::BackendUnavailable {
                reason: format!("status {}", resp.status),
                retry_after: resp.retry_after,
            }),
            status => Err(GenerationError::BackendRefusal {
                status,
                detail: resp.body.chars().take(200).collect(),
            }),
        }
    }

    /// A one-token completion; any answer, including a refusal, proves the
    /// endpoint is reachable.
    fn health(&self) -> Result<(), GenerationError> {
        let probe = ChatRequest {
            model: self.model.clone(),
            messages: vec![ChatMessage {
                role: "user".into(),
                content: "ping".into(),
            }],
            temperature: 0.0,
            top_p: 1.0,
            max_tokens: 1,
            seed: None,
        };
        match self.complete(&probe) {
            Ok(_) | Err(GenerationError::BackendRefusal { .. }) => Ok(()),
            Err(e) => Err(e),
        }
    }
}
