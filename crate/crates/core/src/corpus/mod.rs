//! Document ingestion: normalization, OCR post-correction, segmentation into
//! chunks and chunk serialization.

mod correct;
mod manifest;
mod markdown;
mod normalize;
mod segment;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use correct::{apply_corrections, load_rules, CorrectionRule, RuleSet, GUARD_CONTEXT_CHARS};
pub use manifest::{load_manifest, parse_manifest};
pub use markdown::{
    from_markdown, read_chunk_dir, read_jsonl, to_markdown, write_chunk_dir, write_jsonl,
};
pub use normalize::normalize_text;
pub use segment::segment;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("invalid correction rule {index}: {reason}")]
    InvalidRule { index: usize, reason: String },
    #[error("document {0} has no tokens after normalization")]
    EmptyDocument(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid chunking config: {0}")]
    InvalidConfig(String),
    #[error("invalid document: {0}")]
    InvalidDocument(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CorpusError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Handbook,
    Manual,
    Textbook,
    Bulletin,
    Regional,
    Other,
}

impl SourceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceKind::Handbook => "handbook",
            SourceKind::Manual => "manual",
            SourceKind::Textbook => "textbook",
            SourceKind::Bulletin => "bulletin",
            SourceKind::Regional => "regional",
            SourceKind::Other => "other",
        }
    }
}

impl std::str::FromStr for SourceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "handbook" => SourceKind::Handbook,
            "manual" => SourceKind::Manual,
            "textbook" => SourceKind::Textbook,
            "bulletin" => SourceKind::Bulletin,
            "regional" => SourceKind::Regional,
            "other" => SourceKind::Other,
            other => return Err(format!("unknown source_kind {other:?}")),
        })
    }
}

/// One curated source with its extracted text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceDocument {
    pub doc_id: String,
    pub title: String,
    pub source_kind: SourceKind,
    pub language: String,
    pub raw_text: String,
    #[serde(default)]
    pub provenance: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChunkingConfig {
    pub min_tokens: usize,
    pub max_tokens: usize,
    pub min_terminal_tokens: usize,
}

impl Default for ChunkingConfig {
    fn default() -> Self {
        Self {
            min_tokens: 150,
            max_tokens: 300,
            min_terminal_tokens: 50,
        }
    }
}

impl ChunkingConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.min_terminal_tokens == 0
            || self.min_terminal_tokens > self.min_tokens
            || self.min_tokens >= self.max_tokens
        {
            return Err(CorpusError::InvalidConfig(format!(
                "need 0 < min_terminal_tokens ({}) <= min_tokens ({}) < max_tokens ({})",
                self.min_terminal_tokens, self.min_tokens, self.max_tokens
            )));
        }
        Ok(())
    }
}

/// The retrieval unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: String,
    pub doc_id: String,
    pub ordinal: u32,
    pub text: String,
    pub token_count: u32,
    /// Heading path, e.g. `"ধান > রোগ"`; empty before the first heading.
    pub topic: String,
    /// `ordinal / chunk count` within the source document.
    pub structural_position: f64,
    pub source_kind: SourceKind,
}

pub fn chunk_id(doc_id: &str, ordinal: u32) -> String {
    format!("{doc_id}-{ordinal:04}")
}

/// Outcome of running one document through the whole pipeline.
#[derive(Debug, Clone)]
pub struct ProcessedDocument {
    pub doc_id: String,
    pub corrections: usize,
    pub chunks: Vec<Chunk>,
}

/// normalize -> correct -> normalize -> segment.
///
/// Normalization runs again after correction so replacements cannot leave
/// doubled whitespace behind.
pub fn process_document(
    doc: &SourceDocument,
    rules: &RuleSet,
    cfg: &ChunkingConfig,
) -> Result<ProcessedDocument, CorpusError> {
    let normalized = normalize_text(&doc.raw_text);
    let (corrected, corrections) = rules.apply(&normalized);
    let text = normalize_text(&corrected);
    let clean = SourceDocument {
        raw_text: text,
        ..doc.clone()
    };
    let chunks = segment(&clean, cfg)?;
    Ok(ProcessedDocument {
        doc_id: doc.doc_id.clone(),
        corrections,
        chunks,
    })
}

pub fn process_corpus(
    docs: &[SourceDocument],
    rules: &RuleSet,
    cfg: &ChunkingConfig,
) -> Result<Vec<ProcessedDocument>, CorpusError> {
    cfg.validate()?;
    docs.iter()
        .map(|d| process_document(d, rules, cfg))
        .collect()
}
