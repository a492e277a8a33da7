//! Prompt templates and token-budgeted prompt assembly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::GenerationError;
use crate::retrieval::RetrievalResult;
use crate::text;

pub const TEMPLATE_VERSION: &str = "v1";
const DEFAULT_SYSTEM: &str = include_str!("../../templates/system_instructions.v1.txt");
const DEFAULT_BODY: &str = include_str!("../../templates/prompt.v1.txt");
const PLACEHOLDERS: [&str; 3] = ["{context}", "{question}", "{history}"];

/// System instructions plus the user-message body with `{context}`,
/// `{question}` and `{history}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub system: String,
    pub body: String,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self {
            system: DEFAULT_SYSTEM.trim_end().to_owned(),
            body: DEFAULT_BODY.trim_end().to_owned(),
        }
    }
}

impl PromptTemplate {
    pub fn new(system: &str, body: &str) -> Result<Self, GenerationError> {
        for p in PLACEHOLDERS {
            if body.matches(p).count() != 1 {
                return Err(GenerationError::InvalidTemplate(format!(
                    "body must contain {p} exactly once"
                )));
            }
        }
        if system.trim().is_empty() {
            return Err(GenerationError::InvalidTemplate(
                "system instructions are empty".into(),
            ));
        }
        Ok(Self {
            system: system.trim_end().to_owned(),
            body: body.trim_end().to_owned(),
        })
    }

    pub fn load(system_path: &Path, body_path: &Path) -> Result<Self, GenerationError> {
        let read = |p: &Path| {
            fs::read_to_string(p)
                .map_err(|e| GenerationError::InvalidTemplate(format!("{}: {e}", p.display())))
        };
        Self::new(&read(system_path)?, &read(body_path)?)
    }

    fn render(&self, context: &str, question: &str, history: &str) -> String {
        // Placeholders are substituted in a single left-to-right pass so text
        // inside a chunk that looks like a placeholder is never expanded.
        let mut out = String::with_capacity(self.body.len() + context.len() + question.len());
        let mut rest = self.body.as_str();
        while let Some(start) = rest.find('{') {
            out.push_str(&rest[..start]);
            let tail = &rest[start..];
            let hit = [
                ("{context}", context),
                ("{question}", question),
                ("{history}", history),
            ]
            .into_iter()
            .find(|(p, _)| tail.starts_with(p));
            match hit {
                Some((p, value)) => {
                    out.push_str(value);
                    rest = &tail[p.len()..];
                }
                None => {
                    out.push('{');
                    rest = &tail[1..];
                }
            }
        }
        out.push_str(rest);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryTurn {
    pub role: Role,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextBlock {
    pub chunk_id: String,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptLimits {
    /// Backend context window in tokens.
    pub context_limit: usize,
    /// Most recent dialogue turns carried into the prompt.
    pub history_turns: usize,
}

impl Default for PromptLimits {
    fn default() -> Self {
        Self {
            context_limit: 4096,
            history_turns: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_instructions: String,
    pub context_blocks: Vec<ContextBlock>,
    pub user_question: String,
    pub dialogue_history: Vec<HistoryTurn>,
    /// The rendered user message sent to the backend.
    pub user_prompt: String,
    pub prompt_tokens: usize,
}

pub fn render_block(rank: usize, block: &ContextBlock) -> String {
    format!("[{rank}] ({})\n{}", block.chunk_id, block.text)
}

fn render_history(turns: &[HistoryTurn]) -> String {
    if turns.is_empty() {
        return "(none)".into();
    }
    turns
        .iter()
        .map(|t| match t.role {
            Role::User => format!("user: {}", t.text),
            Role::Assistant => format!("assistant: {}", t.text),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Assemble the prompt, keeping the longest rank-ordered prefix of the
/// retrieved blocks whose rendered prompt fits in
/// `context_limit - max_output_tokens` tokens.
pub fn build_prompt(
    question: &str,
    retrieval: &RetrievalResult,
    history: &[HistoryTurn],
    limits: &PromptLimits,
    max_output_tokens: usize,
    template: &PromptTemplate,
) -> Result<PromptBundle, GenerationError> {
    if retrieval.items.is_empty() {
        return Err(GenerationError::EmptyRetrieval);
    }
    let budget = limits.context_limit.saturating_sub(max_output_tokens);
    let history: Vec<HistoryTurn> = history
        .iter()
        .skip(history.len().saturating_sub(limits.history_turns))
        .cloned()
        .collect();
    let history_text = render_history(&history);
    let system_tokens = text::token_count(&template.system);
    let blocks: Vec<ContextBlock> = retrieval
        .items
        .iter()
        .map(|it| ContextBlock {
            chunk_id: it.chunk_id.clone(),
            text: it.text.clone(),
        })
        .collect();
    let rendered: Vec<String> = blocks
        .iter()
        .enumerate()
        .map(|(i, b)| render_block(i + 1, b))
        .collect();

    for keep in (1..=blocks.len()).rev() {
        let prompt = template.render(&rendered[..keep].join("\n\n"), question, &history_text);
        let tokens = system_tokens + text::token_count(&prompt);
        if tokens <= budget {
            return Ok(PromptBundle {
                system_instructions: template.system.clone(),
                context_blocks: blocks[..keep].to_vec(),
                user_question: question.to_owned(),
                dialogue_history: history,
                user_prompt: prompt,
                prompt_tokens: tokens,
            });
        }
    }
    Err(GenerationError::ContextBudgetExhausted { budget })
}
