//! Persistent cosine index with exact and HNSW search.

mod hnsw;
mod persist;

use std::collections::HashMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Chunk;
use crate::embedding::{self, EmbeddingVector};
use hnsw::Hnsw;
pub use hnsw::{HnswParams, QueryParams};
pub use persist::{CHUNKS_FILE, META_FILE, VECTORS_FILE};

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("chunk id {0:?} is already indexed")]
    DuplicateId(String),
    #[error("dimension mismatch: index has {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("index is empty")]
    EmptyIndex,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("corrupt index at {path}: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub chunk_id: String,
    pub score: f64,
}

/// Chunks, their vectors and the ANN graph over them.
///
/// `add` needs `&mut self`; searches take `&self`, so a shared index is
/// read-only and a new entry is visible only once `add` has returned.
#[derive(Debug, Clone)]
pub struct VectorIndex {
    dims: usize,
    provider: String,
    build: HnswParams,
    query: QueryParams,
    chunks: Vec<Chunk>,
    vectors: Vec<EmbeddingVector>,
    ids: HashMap<String, u32>,
    graph: Hnsw,
}

impl VectorIndex {
    pub fn new(dims: usize, provider: impl Into<String>, build: HnswParams, query: QueryParams) -> Self {
        Self {
            dims,
            provider: provider.into(),
            build,
            query,
            chunks: Vec::new(),
            vectors: Vec::new(),
            ids: HashMap::new(),
            graph: Hnsw::new(build),
        }
    }

    pub fn with_defaults(dims: usize, provider: impl Into<String>) -> Self {
        Self::new(dims, provider, HnswParams::default(), QueryParams::default())
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn provider(&self) -> &str {
        &self.provider
    }

    pub fn build_params(&self) -> HnswParams {
        self.build
    }

    pub fn query_params(&self) -> QueryParams {
        self.query
    }

    pub fn set_query_params(&mut self, query: QueryParams) {
        self.query = query;
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    /// Chunks in insertion order.
    pub fn chunks(&self) -> &[Chunk] {
        &self.chunks
    }

    pub fn get(&self, chunk_id: &str) -> Option<(&Chunk, &EmbeddingVector)> {
        self.ids
            .get(chunk_id)
            .map(|&i| (&self.chunks[i as usize], &self.vectors[i as usize]))
    }

    pub fn add(&mut self, chunk: Chunk, vector: EmbeddingVector) -> Result<(), IndexError> {
        if vector.dims() != self.dims {
            return Err(IndexError::DimensionMismatch {
                expected: self.dims,
                got: vector.dims(),
            });
        }
        if self.ids.contains_key(&chunk.chunk_id) {
            return Err(IndexError::DuplicateId(chunk.chunk_id));
        }
        let id = self.chunks.len() as u32;
        self.ids.insert(chunk.chunk_id.clone(), id);
        self.chunks.push(chunk);
        self.vectors.push(vector);
        self.graph.insert(&self.vectors, id);
        Ok(())
    }

    /// Rebuild the graph from the stored entries alone.
    pub fn rebuild(&self) -> Self {
        let mut fresh = Self::new(self.dims, self.provider.clone(), self.build, self.query);
        for (c, v) in self.chunks.iter().zip(&self.vectors) {
            fresh
                .add(c.clone(), v.clone())
                .expect("entries of a valid index re-add cleanly");
        }
        fresh
    }

    fn check_query(&self, q: &EmbeddingVector, k: usize) -> Result<(), IndexError> {
        if k == 0 {
            return Err(IndexError::InvalidK);
        }
        if q.dims() != self.dims {
            return Err(IndexError::DimensionMismatch {
                expected: self.dims,
                got: q.dims(),
            });
        }
        if self.is_empty() {
            return Err(IndexError::EmptyIndex);
        }
        Ok(())
    }

    /// Score descending, chunk id ascending on ties, truncated to `k`.
    fn rank(&self, mut scored: Vec<(f64, u32)>, k: usize) -> Vec<SearchHit> {
        scored.sort_by(|a, b| {
            b.0.total_cmp(&a.0).then_with(|| {
                self.chunks[a.1 as usize]
                    .chunk_id
                    .cmp(&self.chunks[b.1 as usize].chunk_id)
            })
        });
        scored.truncate(k);
        scored
            .into_iter()
            .map(|(score, i)| SearchHit {
                chunk_id: self.chunks[i as usize].chunk_id.clone(),
                score,
            })
            .collect()
    }

    fn score(&self, q: &EmbeddingVector, i: u32) -> f64 {
        embedding::dot(q.as_slice(), self.vectors[i as usize].as_slice()).clamp(-1.0, 1.0)
    }

    /// Exhaustive top-k by cosine.
    pub fn exact_search(&self, q: &EmbeddingVector, k: usize) -> Result<Vec<SearchHit>, IndexError> {
        self.check_query(q, k)?;
        let scored = (0..self.len() as u32).map(|i| (self.score(q, i), i)).collect();
        Ok(self.rank(scored, k))
    }

    /// Approximate top-k through the HNSW graph. Indexes no larger than
    /// `ef_search` are scanned exhaustively.
    pub fn ann_search(&self, q: &EmbeddingVector, k: usize) -> Result<Vec<SearchHit>, IndexError> {
        self.check_query(q, k)?;
        let ef = self.query.ef_search.max(k);
        if self.len() <= ef {
            return self.exact_search(q, k);
        }
        let scored = self
            .graph
            .search(&self.vectors, q.as_slice(), ef)
            .into_iter()
            .map(|n| (self.score(q, n.id), n.id))
            .collect();
        Ok(self.rank(scored, k))
    }

    #[cfg(test)]
    pub(crate) fn graph_is_consistent(&self) -> bool {
        self.graph.is_consistent()
    }
}
