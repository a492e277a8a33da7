//! The advisor: a swappable knowledge base plus the generation stack.

use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::normalize_text;
use crate::embedding::EmbeddingProvider;
use crate::generation::{GenerationError, GenerationResult, Generator, HistoryTurn, PromptBundle};
use crate::retrieval::{self, KnowledgeBase, RetrievalConfig, RetrievalError, RetrievalResult};

#[derive(Debug, Error)]
pub enum AdvisorError {
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Generation(#[from] GenerationError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub retrieval: RetrievalResult,
    pub prompt: PromptBundle,
    pub generation: GenerationResult,
}

pub struct Advisor {
    kb: RwLock<Arc<KnowledgeBase>>,
    provider: Arc<dyn EmbeddingProvider>,
    generator: Generator,
    retrieval: RetrievalConfig,
}

impl Advisor {
    pub fn new(
        kb: KnowledgeBase,
        provider: Arc<dyn EmbeddingProvider>,
        generator: Generator,
        retrieval: RetrievalConfig,
    ) -> Self {
        Self {
            kb: RwLock::new(Arc::new(kb)),
            provider,
            generator,
            retrieval,
        }
    }

    /// The knowledge base current at call time. Readers keep using their
    /// snapshot while a rebuild is swapped in.
    pub fn knowledge_base(&self) -> Arc<KnowledgeBase> {
        self.kb.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// Replace the knowledge base, returning the previous one.
    pub fn swap(&self, kb: KnowledgeBase) -> Arc<KnowledgeBase> {
        let mut guard = self.kb.write().unwrap_or_else(|e| e.into_inner());
        std::mem::replace(&mut *guard, Arc::new(kb))
    }

    pub fn provider(&self) -> &dyn EmbeddingProvider {
        self.provider.as_ref()
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn retrieval_config(&self) -> &RetrievalConfig {
        &self.retrieval
    }

    /// Retrieve for `question` after the same normalization the corpus got.
    pub fn retrieve(&self, question: &str) -> Result<RetrievalResult, RetrievalError> {
        let kb = self.knowledge_base();
        let question = normalize_text(question);
        retrieval::retrieve(&question, &self.retrieval, &kb, self.provider.as_ref())
    }

    pub fn answer_from(
        &self,
        question: &str,
        retrieval: RetrievalResult,
        history: &[HistoryTurn],
    ) -> Result<Answer, AdvisorError> {
        let (prompt, generation) = self.generator.answer(question, &retrieval, history)?;
        Ok(Answer {
            retrieval,
            prompt,
            generation,
        })
    }

    pub fn answer(&self, question: &str, history: &[HistoryTurn]) -> Result<Answer, AdvisorError> {
        let retrieval = self.retrieve(question)?;
        self.answer_from(question, retrieval, history)
    }
}
