//! Ingest and index building shared by the CLI and `/ingest`.

use std::collections::HashSet;
use std::path::Path;

use advisor_core::corpus::{self, Chunk, ChunkingConfig, CorpusError, CorrectionRule, RuleSet, SourceDocument};
use advisor_core::embedding::{EmbeddingError, EmbeddingProvider};
use advisor_core::index::{HnswParams, IndexError, QueryParams, VectorIndex};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("embedding failed: {0}")]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Index(#[from] IndexError),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IngestSummary {
    pub documents: usize,
    pub chunks: usize,
    pub corrections: usize,
}

/// Run every document through normalize, correct and segment.
pub fn ingest(
    docs: &[SourceDocument],
    rules: &[CorrectionRule],
    cfg: &ChunkingConfig,
) -> Result<(Vec<Chunk>, IngestSummary), PipelineError> {
    let rules = RuleSet::compile(rules)?;
    let processed = corpus::process_corpus(docs, &rules, cfg)?;
    let mut summary = IngestSummary {
        documents: processed.len(),
        ..Default::default()
    };
    let mut chunks = Vec::new();
    for p in processed {
        summary.corrections += p.corrections;
        summary.chunks += p.chunks.len();
        chunks.extend(p.chunks);
    }
    Ok((chunks, summary))
}

/// Embed `chunks` in batches and insert them in order.
pub fn build_index(
    chunks: &[Chunk],
    provider: &dyn EmbeddingProvider,
    build: HnswParams,
    query: QueryParams,
    batch_size: usize,
) -> Result<VectorIndex, PipelineError> {
    let mut index = VectorIndex::new(provider.dims(), provider.name(), build, query);
    for batch in chunks.chunks(batch_size.max(1)) {
        let texts: Vec<&str> = batch.iter().map(|c| c.text.as_str()).collect();
        let vectors = provider.embed_batch(&texts)?;
        if vectors.len() != batch.len() {
            return Err(EmbeddingError::InvalidVector(format!(
                "provider returned {} vectors for {} texts",
                vectors.len(),
                batch.len()
            ))
            .into());
        }
        for (c, v) in batch.iter().zip(vectors) {
            index.add(c.clone(), v)?;
        }
    }
    Ok(index)
}

/// Replace every chunk of the re-ingested documents, keep the rest.
/// The result is ordered by `(doc_id, ordinal)`.
pub fn merge_chunks(existing: &[Chunk], incoming: Vec<Chunk>) -> Vec<Chunk> {
    let replaced: HashSet<&str> = incoming.iter().map(|c| c.doc_id.as_str()).collect();
    let mut out: Vec<Chunk> = existing
        .iter()
        .filter(|c| !replaced.contains(c.doc_id.as_str()))
        .cloned()
        .collect();
    out.extend(incoming);
    out.sort_by(|a, b| (&a.doc_id, a.ordinal).cmp(&(&b.doc_id, b.ordinal)));
    out
}

/// Write the chunks of `doc_ids` as Markdown files, removing stale chunk
/// files those documents left behind.
pub fn write_documents(dir: &Path, doc_ids: &HashSet<String>, chunks: &[Chunk]) -> Result<(), CorpusError> {
    if dir.is_dir() {
        let stale = std::fs::read_dir(dir).map_err(|e| CorpusError::Io { path: dir.into(), source: e })?;
        for entry in stale.filter_map(Result::ok) {
            let path = entry.path();
            let Some(stem) = path
                .extension()
                .filter(|x| *x == "md")
                .and(path.file_stem())
                .and_then(|s| s.to_str())
            else {
                continue;
            };
            // Chunk files are named `<doc_id>-NNNN.md`.
            let owner = stem.rsplit_once('-').map(|(d, _)| d);
            if owner.is_some_and(|d| doc_ids.contains(d)) {
                std::fs::remove_file(&path).map_err(|e| CorpusError::Io { path: path.clone(), source: e })?;
            }
        }
    }
    let fresh: Vec<Chunk> = chunks.iter().filter(|c| doc_ids.contains(&c.doc_id)).cloned().collect();
    corpus::write_chunk_dir(dir, &fresh)
}

/// True when `dir` holds chunk files `read_chunk_dir` can load.
pub fn has_chunks(dir: &Path) -> bool {
    dir.join(advisor_core::index::CHUNKS_FILE).is_file()
        || std::fs::read_dir(dir).is_ok_and(|rd| {
            rd.filter_map(Result::ok)
                .any(|e| e.path().extension().is_some_and(|x| x == "md"))
        })
}
