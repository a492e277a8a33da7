//! Retrieval-augmented advisory engine.
//!
//! The crate is organised along the request path:
//!
//! - [`corpus`]: raw extracted text to normalized, corrected, segmented chunks
//!   stored as Markdown-with-frontmatter or JSONL.
//! - [`embedding`] and [`index`]: unit-norm embeddings and a persistent
//!   exact + HNSW cosine index.
//! - [`retrieval`]: BM25 and metadata signals fused with semantic scores.
//! - [`generation`]: prompt assembly, chat-completion backends, grounding
//!   checks and voice formatting.
//! - [`dialogue`]: transcript repair, ambiguity prompts and multi-turn sessions
//!   behind the voice webhook.
//! - [`eval`]: rubric aggregation, coverage, similarity correlation and report
//!   emission.
//!
//! [`engine::Advisor`] wires retrieval and generation together and is what the
//! service and the dialogue gateway call.

pub mod corpus;
pub mod dialogue;
pub mod embedding;
pub mod engine;
pub mod eval;
pub mod generation;
pub mod index;
pub mod retrieval;
mod net;
pub mod text;

pub use corpus::{Chunk, ChunkingConfig, CorrectionRule, SourceDocument, SourceKind};
pub use embedding::{cosine, EmbeddingProvider, EmbeddingVector, HashingEmbedder};
pub use engine::Advisor;
pub use index::VectorIndex;
pub use retrieval::{KnowledgeBase, RetrievalConfig, RetrievalResult};
