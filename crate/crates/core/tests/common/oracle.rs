//! Brute-force fusion over exact-search candidates, independent of the
//! retrieval module.

use std::collections::{HashMap, HashSet};

use advisor_core::embedding::embed;
use advisor_core::retrieval::{KnowledgeBase, RetrievalConfig};
use advisor_core::text::normalized_tokens;
use advisor_core::{Chunk, HashingEmbedder};

/// Straightforward BM25 over the whole store.
fn bm25(query: &str, chunk: &Chunk, all: &[Chunk], k1: f64, b: f64) -> f64 {
    let docs: Vec<Vec<String>> = all.iter().map(|c| normalized_tokens(&c.text)).collect();
    let n = docs.len() as f64;
    let avgdl = docs.iter().map(Vec::len).sum::<usize>() as f64 / n;
    let doc = normalized_tokens(&chunk.text);
    let terms: HashSet<String> = normalized_tokens(query).into_iter().collect();
    let mut score = 0.0;
    for t in terms {
        let df = docs.iter().filter(|d| d.contains(&t)).count() as f64;
        let tf = doc.iter().filter(|w| **w == t).count() as f64;
        if tf == 0.0 {
            continue;
        }
        let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
        score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * doc.len() as f64 / avgdl));
    }
    score
}

fn scale(xs: &[f64], flat: f64) -> Vec<f64> {
    let lo = xs.iter().cloned().fold(f64::MAX, f64::min);
    let hi = xs.iter().cloned().fold(f64::MIN, f64::max);
    xs.iter()
        .map(|x| if hi > lo { (x - lo) / (hi - lo) } else { flat })
        .collect()
}

/// Brute-force fusion over exact-search candidates.
pub fn oracle(query: &str, chunks: &[Chunk], kb: &KnowledgeBase, provider: &HashingEmbedder, cfg: &RetrievalConfig) -> Vec<(String, f64)> {
    let q = embed(provider, query).unwrap();
    let hits = kb.index.exact_search(&q, cfg.k_candidates).unwrap();
    let by_id: HashMap<&str, &Chunk> = chunks.iter().map(|c| (c.chunk_id.as_str(), c)).collect();
    let qtok: HashSet<String> = normalized_tokens(query).into_iter().collect();
    let sem: Vec<f64> = hits.iter().map(|h| h.score).collect();
    let lex: Vec<f64> = hits
        .iter()
        .map(|h| bm25(query, by_id[h.chunk_id.as_str()], chunks, cfg.bm25_k1, cfg.bm25_b))
        .collect();
    let boost: Vec<f64> = hits
        .iter()
        .map(|h| {
            let topic: HashSet<String> = normalized_tokens(&by_id[h.chunk_id.as_str()].topic).into_iter().collect();
            if qtok.iter().any(|t| topic.contains(t)) { 1.0 } else { 0.0 }
        })
        .collect();
    let s = scale(&sem, 1.0);
    let l = scale(&lex, if lex.iter().any(|&x| x > 0.0) { 1.0 } else { 0.0 });
    let mut fused: Vec<(String, f64)> = hits
        .iter()
        .enumerate()
        .map(|(i, h)| {
            (h.chunk_id.clone(), cfg.w_semantic * s[i] + cfg.w_lexical * l[i] + cfg.w_metadata * boost[i])
        })
        .collect();
    fused.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    fused.truncate(cfg.k_final);
    fused
}
