//! Grounded answer generation: prompt assembly, backend call and post-checks.

mod backend;
mod grounding;
mod prompt;
mod voice;

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backend::{
    generate, ChatBackend, ChatMessage, ChatRequest, HttpChatBackend, StubBackend, StubMode,
    STUB_NO_CONTEXT,
};
pub use grounding::{
    append_disclaimer, cited_ranks, grounding_check, is_coherent, sentence_support,
    strip_citations, GroundingConfig, GroundingReport, SentenceSupport,
    DEFAULT_DISCLAIMER_FRACTION, DEFAULT_SUPPORT_THRESHOLD, UNCERTAINTY_DISCLAIMER,
};
pub use prompt::{
    build_prompt, render_block, ContextBlock, HistoryTurn, PromptBundle, PromptLimits,
    PromptTemplate, Role, TEMPLATE_VERSION,
};
pub use voice::{format_for_voice, MAX_SPOKEN_TOKENS};

use crate::retrieval::RetrievalResult;

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("backend unavailable: {reason}")]
    BackendUnavailable {
        reason: String,
        retry_after: Option<Duration>,
    },
    #[error("backend refused the request (status {status}): {detail}")]
    BackendRefusal { status: u16, detail: String },
    #[error("backend timed out")]
    TimeoutExceeded,
    #[error("no context block fits in the prompt budget of {budget} tokens")]
    ContextBudgetExhausted { budget: usize },
    #[error("retrieval returned no context")]
    EmptyRetrieval,
    #[error("backend returned an empty answer")]
    EmptyAnswer,
    #[error("invalid sampling config: {0}")]
    InvalidSampling(String),
    #[error("invalid prompt template: {0}")]
    InvalidTemplate(String),
}

impl GenerationError {
    /// Failures of the remote model rather than of the request itself.
    pub fn is_upstream(&self) -> bool {
        matches!(
            self,
            Self::BackendUnavailable { .. }
                | Self::BackendRefusal { .. }
                | Self::TimeoutExceeded
                | Self::EmptyAnswer
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub temperature: f64,
    pub top_p: f64,
    pub max_output_tokens: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            temperature: 0.2,
            top_p: 0.9,
            max_output_tokens: 512,
            seed: None,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<(), GenerationError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GenerationError::InvalidSampling("temperature must be in [0, 2]".into()));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(GenerationError::InvalidSampling("top_p must be in (0, 1]".into()));
        }
        if self.max_output_tokens == 0 {
            return Err(GenerationError::InvalidSampling("max_output_tokens must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub answer_text: String,
    pub citations: Vec<String>,
    pub grounding: Vec<SentenceSupport>,
    pub disclaimer_added: bool,
    pub coherent: bool,
    pub voice_ready_text: String,
}

/// Citations from explicit `[n]` markers that name a block in the prompt, or,
/// when there are none, the best supporting block of each supported sentence.
fn citations(raw: &str, report: &GroundingReport, blocks: &[ContextBlock]) -> Vec<String> {
    let explicit: Vec<usize> = cited_ranks(raw)
        .into_iter()
        .filter(|&n| n >= 1 && n <= blocks.len())
        .collect();
    let ranks = if explicit.is_empty() {
        let mut seen = Vec::new();
        for s in report.sentences.iter().filter(|s| !s.flagged) {
            if let Some(b) = s.best_block {
                if !seen.contains(&b) {
                    seen.push(b);
                }
            }
        }
        seen
    } else {
        explicit
    };
    ranks.into_iter().map(|n| blocks[n - 1].chunk_id.clone()).collect()
}

/// Run the post-checks on a raw backend answer.
pub fn finalize(raw: &str, bundle: &PromptBundle, cfg: &GroundingConfig) -> Result<GenerationResult, GenerationError> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Err(GenerationError::EmptyAnswer);
    }
    let report = grounding_check(raw, &bundle.context_blocks, cfg);
    let coherent = is_coherent(raw);
    let mut answer_text = report.answer_text.clone();
    let mut disclaimer_added = report.disclaimer_added;
    if !coherent && !disclaimer_added {
        answer_text = append_disclaimer(&answer_text);
        disclaimer_added = true;
    }
    Ok(GenerationResult {
        citations: citations(raw, &report, &bundle.context_blocks),
        voice_ready_text: format_for_voice(&answer_text),
        answer_text,
        grounding: report.sentences,
        disclaimer_added,
        coherent,
    })
}

/// Prompt assembly, backend call and post-checks behind one handle.
#[derive(Clone)]
pub struct Generator {
    pub backend: Arc<dyn ChatBackend>,
    pub template: PromptTemplate,
    pub limits: PromptLimits,
    pub sampling: SamplingConfig,
    pub grounding: GroundingConfig,
}

impl Generator {
    pub fn new(backend: Arc<dyn ChatBackend>) -> Self {
        Self {
            backend,
            template: PromptTemplate::default(),
            limits: PromptLimits::default(),
            sampling: SamplingConfig::default(),
            grounding: GroundingConfig::default(),
        }
    }

    pub fn prompt(
        &self,
        question: &str,
        retrieval: &RetrievalResult,
        history: &[HistoryTurn],
    ) -> Result<PromptBundle, GenerationError> {
        build_prompt(
            question,
            retrieval,
            history,
            &self.limits,
            self.sampling.max_output_tokens,
            &self.template,
        )
    }

    pub fn answer(
        &self,
        question: &str,
        retrieval: &RetrievalResult,
        history: &[HistoryTurn],
    ) -> Result<(PromptBundle, GenerationResult), GenerationError> {
        let bundle = self.prompt(question, retrieval, history)?;
        let raw = generate(self.backend.as_ref(), &bundle, &self.sampling)?;
        let result = finalize(&raw, &bundle, &self.grounding)?;
        Ok((bundle, result))
    }
}
