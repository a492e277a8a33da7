//! Hybrid retrieval: ANN candidates re-ranked by a weighted sum of min-max
//! normalized semantic and BM25 scores plus a binary topic boost.

use std::collections::{HashMap, HashSet};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Chunk;
use crate::embedding::{self, EmbeddingError, EmbeddingProvider};
use crate::index::{IndexError, VectorIndex};
use crate::text;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("index is empty")]
    EmptyIndex,
    #[error("query is empty")]
    EmptyQuery,
    #[error(transparent)]
    Provider(#[from] EmbeddingError),
    #[error(transparent)]
    Index(IndexError),
    #[error("invalid retrieval config: {0}")]
    InvalidConfig(String),
}

impl From<IndexError> for RetrievalError {
    fn from(e: IndexError) -> Self {
        match e {
            IndexError::EmptyIndex => Self::EmptyIndex,
            other => Self::Index(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    pub k_candidates: usize,
    pub k_final: usize,
    pub w_semantic: f64,
    pub w_lexical: f64,
    pub w_metadata: f64,
    pub bm25_k1: f64,
    pub bm25_b: f64,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            k_candidates: 25,
            k_final: 5,
            w_semantic: 0.70,
            w_lexical: 0.25,
            w_metadata: 0.05,
            bm25_k1: 1.2,
            bm25_b: 0.75,
        }
    }
}

impl RetrievalConfig {
    pub fn with_weights(semantic: f64, lexical: f64, metadata: f64) -> Self {
        Self {
            w_semantic: semantic,
            w_lexical: lexical,
            w_metadata: metadata,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), RetrievalError> {
        let w = [self.w_semantic, self.w_lexical, self.w_metadata];
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(RetrievalError::InvalidConfig("weights must be >= 0".into()));
        }
        if (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(RetrievalError::InvalidConfig("weights must sum to 1".into()));
        }
        if self.k_final == 0 || self.k_final > self.k_candidates {
            return Err(RetrievalError::InvalidConfig(
                "need 1 <= k_final <= k_candidates".into(),
            ));
        }
        if self.bm25_k1 < 0.0 || !(0.0..=1.0).contains(&self.bm25_b) {
            return Err(RetrievalError::InvalidConfig("bm25 k1 >= 0 and b in [0,1]".into()));
        }
        Ok(())
    }
}

/// Document frequencies and lengths over the whole chunk store.
#[derive(Debug, Clone, Default)]
pub struct CorpusStats {
    pub chunk_count: usize,
    pub mean_length: f64,
    pub doc_freq: HashMap<String, usize>,
}

impl CorpusStats {
    pub fn from_chunks<'a>(chunks: impl IntoIterator<Item = &'a Chunk>) -> Self {
        let mut doc_freq: HashMap<String, usize> = HashMap::new();
        let mut total = 0usize;
        let mut n = 0usize;
        for c in chunks {
            let toks = text::normalized_tokens(&c.text);
            total += toks.len();
            n += 1;
            for t in toks.into_iter().collect::<HashSet<_>>() {
                *doc_freq.entry(t).or_default() += 1;
            }
        }
        Self {
            chunk_count: n,
            mean_length: if n == 0 { 0.0 } else { total as f64 / n as f64 },
            doc_freq,
        }
    }

    /// `ln(1 + (N - df + 0.5) / (df + 0.5))`, never negative.
    pub fn idf(&self, term: &str) -> f64 {
        let df = self.doc_freq.get(term).copied().unwrap_or(0) as f64;
        let n = self.chunk_count as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }
}

/// Raw BM25 of `chunk` for the distinct terms of `query_tokens`.
pub fn lexical_score(
    query_tokens: &[String],
    chunk: &Chunk,
    stats: &CorpusStats,
    k1: f64,
    b: f64,
) -> f64 {
    let doc = text::normalized_tokens(&chunk.text);
    if doc.is_empty() {
        return 0.0;
    }
    let mut tf: HashMap<&str, usize> = HashMap::new();
    for t in &doc {
        *tf.entry(t.as_str()).or_default() += 1;
    }
    let len_norm = if stats.mean_length > 0.0 {
        doc.len() as f64 / stats.mean_length
    } else {
        1.0
    };
    let mut seen = HashSet::new();
    query_tokens
        .iter()
        .filter(|q| seen.insert(q.as_str()))
        .filter_map(|q| tf.get(q.as_str()).map(|&f| (q, f as f64)))
        .map(|(q, f)| stats.idf(q) * f * (k1 + 1.0) / (f + k1 * (1.0 - b + b * len_norm)))
        .sum()
}

/// 1.0 when any query token is a token of the chunk's topic path.
pub fn metadata_boost(query_tokens: &[String], chunk: &Chunk) -> f64 {
    let topic: HashSet<String> = text::normalized_tokens(&chunk.topic).into_iter().collect();
    if query_tokens.iter().any(|q| topic.contains(q)) {
        1.0
    } else {
        0.0
    }
}

/// Min-max scale to [0, 1]. When every value is equal the result is
/// `degenerate` for all of them.
pub fn min_max(values: &[f64], degenerate: f64) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() || hi - lo <= 0.0 {
        return vec![degenerate; values.len()];
    }
    values.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

/// Per-candidate raw signals before fusion.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub chunk_id: String,
    pub semantic: f64,
    pub lexical: f64,
    pub metadata_boost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedItem {
    pub chunk_id: String,
    pub text: String,
    pub topic: String,
    pub semantic: f64,
    pub lexical: f64,
    pub metadata_boost: f64,
    pub fused: f64,
    pub semantic_raw: f64,
    pub lexical_raw: f64,
}

/// Normalize, fuse and order candidates (fused desc, chunk id asc).
/// Returns `(candidate index, semantic, lexical, fused)` for all candidates.
pub fn fuse(candidates: &[Candidate], cfg: &RetrievalConfig) -> Vec<(usize, f64, f64, f64)> {
    let sem: Vec<f64> = candidates.iter().map(|c| c.semantic).collect();
    let lex: Vec<f64> = candidates.iter().map(|c| c.lexical).collect();
    let lex_degenerate = if lex.iter().any(|&l| l > 0.0) { 1.0 } else { 0.0 };
    let sem_n = min_max(&sem, 1.0);
    let lex_n = min_max(&lex, lex_degenerate);
    let mut out: Vec<(usize, f64, f64, f64)> = candidates
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let fused = cfg.w_semantic * sem_n[i]
                + cfg.w_lexical * lex_n[i]
                + cfg.w_metadata * c.metadata_boost;
            (i, sem_n[i], lex_n[i], fused.clamp(0.0, 1.0))
        })
        .collect();
    out.sort_by(|a, b| {
        b.3.total_cmp(&a.3)
            .then_with(|| candidates[a.0].chunk_id.cmp(&candidates[b.0].chunk_id))
    });
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub embed_ms: f64,
    pub search_ms: f64,
    pub rerank_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub query: String,
    pub items: Vec<RankedItem>,
    pub timings: Timings,
}

/// A loaded index plus the lexical statistics derived from it.
#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    pub index: VectorIndex,
    pub stats: CorpusStats,
}

impl KnowledgeBase {
    pub fn new(index: VectorIndex) -> Self {
        let stats = CorpusStats::from_chunks(index.chunks());
        Self { index, stats }
    }
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

pub fn retrieve(
    query: &str,
    cfg: &RetrievalConfig,
    kb: &KnowledgeBase,
    provider: &dyn EmbeddingProvider,
) -> Result<RetrievalResult, RetrievalError> {
    cfg.validate()?;
    if query.trim().is_empty() {
        return Err(RetrievalError::EmptyQuery);
    }
    if kb.index.is_empty() {
        return Err(RetrievalError::EmptyIndex);
    }

    let t = Instant::now();
    let q = embedding::embed(provider, query).map_err(|e| match e {
        EmbeddingError::EmptyInput => RetrievalError::EmptyQuery,
        other => RetrievalError::Provider(other),
    })?;
    let embed_ms = ms(t);

    let t = Instant::now();
    let hits = kb.index.ann_search(&q, cfg.k_candidates)?;
    let search_ms = ms(t);

    let t = Instant::now();
    let query_tokens = text::normalized_tokens(query);
    let chunks: Vec<&Chunk> = hits
        .iter()
        .map(|h| kb.index.get(&h.chunk_id).expect("hits come from the index").0)
        .collect();
    let candidates: Vec<Candidate> = hits
        .iter()
        .zip(&chunks)
        .map(|(h, c)| Candidate {
            chunk_id: h.chunk_id.clone(),
            semantic: h.score,
            lexical: lexical_score(&query_tokens, c, &kb.stats, cfg.bm25_k1, cfg.bm25_b),
            metadata_boost: metadata_boost(&query_tokens, c),
        })
        .collect();
    let items = fuse(&candidates, cfg)
        .into_iter()
        .take(cfg.k_final)
        .map(|(i, semantic, lexical, fused)| RankedItem {
            chunk_id: candidates[i].chunk_id.clone(),
            text: chunks[i].text.clone(),
            topic: chunks[i].topic.clone(),
            semantic,
            lexical,
            metadata_boost: candidates[i].metadata_boost,
            fused,
            semantic_raw: candidates[i].semantic,
            lexical_raw: candidates[i].lexical,
        })
        .collect();
    let rerank_ms = ms(t);

    Ok(RetrievalResult {
        query: query.to_owned(),
        items,
        timings: Timings {
            embed_ms,
            search_ms,
            rerank_ms,
        },
    })
}
