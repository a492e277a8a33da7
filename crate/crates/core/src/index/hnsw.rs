//! Hierarchical navigable small-world graph over unit vectors.
//!
//! Distances are `1 - dot` in f32; callers rescore the final candidates in
//! f64. Level assignment uses a fixed-seed RNG, so the graph is a pure
//! function of the insertion sequence.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingVector;

const LEVEL_SEED: u64 = 0x5eed_0f_a11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HnswParams {
    pub m: usize,
    pub ef_construction: usize,
}

impl Default for HnswParams {
    fn default() -> Self {
        Self {
            m: 16,
            ef_construction: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct QueryParams {
    pub ef_search: usize,
}

impl Default for QueryParams {
    fn default() -> Self {
        Self { ef_search: 768 }
    }
}

#[inline]
fn dot32(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0.0f32; 8];
    let (ca, ra) = a.split_at(a.len() - a.len() % 8);
    let (cb, rb) = b.split_at(ca.len());
    for (x, y) in ca.chunks_exact(8).zip(cb.chunks_exact(8)) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    let tail: f32 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    acc.iter().sum::<f32>() + tail
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Near {
    pub dist: f32,
    pub id: u32,
}

impl Eq for Near {}

impl Ord for Near {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then_with(|| self.id.cmp(&other.id))
    }
}

impl PartialOrd for Near {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Hnsw {
    params: HnswParams,
    level_mult: f64,
    /// node -> level -> neighbour ids
    links: Vec<Vec<Vec<u32>>>,
    entry: Option<u32>,
    top_level: usize,
    rng: ChaCha8Rng,
}

impl Hnsw {
    pub fn new(params: HnswParams) -> Self {
        let m = params.m.max(2);
        Self {
            params: HnswParams { m, ..params },
            level_mult: 1.0 / (m as f64).ln(),
            links: Vec::new(),
            entry: None,
            top_level: 0,
            rng: ChaCha8Rng::seed_from_u64(LEVEL_SEED),
        }
    }

    fn capacity(&self, level: usize) -> usize {
        if level == 0 {
            self.params.m * 2
        } else {
            self.params.m
        }
    }

    fn dist(vectors: &[EmbeddingVector], a: u32, q: &[f32]) -> f32 {
        1.0 - dot32(vectors[a as usize].as_slice(), q)
    }

    fn random_level(&mut self) -> usize {
        let u: f64 = 1.0 - self.rng.random::<f64>(); // (0, 1]
        (-u.ln() * self.level_mult).floor() as usize
    }

    fn greedy(&self, vectors: &[EmbeddingVector], q: &[f32], mut cur: Near, level: usize) -> Near {
        loop {
            let mut improved = false;
            for &n in &self.links[cur.id as usize][level] {
                let cand = Near {
                    dist: Self::dist(vectors, n, q),
                    id: n,
                };
                if cand < cur {
                    cur = cand;
                    improved = true;
                }
            }
            if !improved {
                return cur;
            }
        }
    }

    /// Beam search on one layer; returns up to `ef` nodes, nearest first.
    fn search_layer(
        &self,
        vectors: &[EmbeddingVector],
        q: &[f32],
        entry: &[Near],
        ef: usize,
        level: usize,
    ) -> Vec<Near> {
        let mut visited = vec![false; self.links.len()];
        let mut candidates: BinaryHeap<Reverse<Near>> = BinaryHeap::new();
        let mut results: BinaryHeap<Near> = BinaryHeap::new();
        for &e in entry {
            if !std::mem::replace(&mut visited[e.id as usize], true) {
                candidates.push(Reverse(e));
                results.push(e);
            }
        }
        while results.len() > ef {
            results.pop();
        }
        while let Some(Reverse(c)) = candidates.pop() {
            if results.len() >= ef && results.peek().is_some_and(|w| c > *w) {
                break;
            }
            for &n in &self.links[c.id as usize][level] {
                if std::mem::replace(&mut visited[n as usize], true) {
                    continue;
                }
                let cand = Near {
                    dist: Self::dist(vectors, n, q),
                    id: n,
                };
                if results.len() < ef || results.peek().is_some_and(|w| cand < *w) {
                    candidates.push(Reverse(cand));
                    results.push(cand);
                    if results.len() > ef {
                        results.pop();
                    }
                }
            }
        }
        results.into_sorted_vec()
    }

    /// Keep a candidate only if it is closer to the base than to every
    /// neighbour already kept; top up with the nearest pruned candidates.
    fn select(vectors: &[EmbeddingVector], sorted: &[Near], max: usize) -> Vec<u32> {
        let mut kept: Vec<Near> = Vec::with_capacity(max);
        let mut pruned = Vec::new();
        for &c in sorted {
            if kept.len() >= max {
                break;
            }
            let cv = vectors[c.id as usize].as_slice();
            let diverse = kept.iter().all(|k| Self::dist(vectors, k.id, cv) > c.dist);
            if diverse {
                kept.push(c);
            } else {
                pruned.push(c);
            }
        }
        for c in pruned {
            if kept.len() >= max {
                break;
            }
            kept.push(c);
        }
        kept.into_iter().map(|n| n.id).collect()
    }

    /// Insert node `id`, which must equal the current node count.
    pub fn insert(&mut self, vectors: &[EmbeddingVector], id: u32) {
        debug_assert_eq!(id as usize, self.links.len());
        let level = self.random_level();
        self.links.push(vec![Vec::new(); level + 1]);
        let q = vectors[id as usize].as_slice();

        let Some(entry) = self.entry else {
            self.entry = Some(id);
            self.top_level = level;
            return;
        };

        let mut cur = Near {
            dist: Self::dist(vectors, entry, q),
            id: entry,
        };
        for l in (level + 1..=self.top_level).rev() {
            cur = self.greedy(vectors, q, cur, l);
        }
        let mut eps = vec![cur];
        for l in (0..=level.min(self.top_level)).rev() {
            let found = self.search_layer(vectors, q, &eps, self.params.ef_construction, l);
            let chosen = Self::select(vectors, &found, self.params.m);
            for &n in &chosen {
                self.links[n as usize][l].push(id);
                if self.links[n as usize][l].len() > self.capacity(l) {
                    self.shrink(vectors, n, l);
                }
            }
            self.links[id as usize][l] = chosen;
            eps = found;
        }
        if level > self.top_level {
            self.top_level = level;
            self.entry = Some(id);
        }
    }

    fn shrink(&mut self, vectors: &[EmbeddingVector], node: u32, level: usize) {
        let base = vectors[node as usize].as_slice();
        let mut cands: Vec<Near> = self.links[node as usize][level]
            .iter()
            .map(|&n| Near {
                dist: Self::dist(vectors, n, base),
                id: n,
            })
            .collect();
        cands.sort();
        self.links[node as usize][level] = Self::select(vectors, &cands, self.capacity(level));
    }

    /// Approximate nearest `ef` nodes, nearest first.
    pub fn search(&self, vectors: &[EmbeddingVector], q: &[f32], ef: usize) -> Vec<Near> {
        let Some(entry) = self.entry else {
            return Vec::new();
        };
        let mut cur = Near {
            dist: Self::dist(vectors, entry, q),
            id: entry,
        };
        for l in (1..=self.top_level).rev() {
            cur = self.greedy(vectors, q, cur, l);
        }
        self.search_layer(vectors, q, &[cur], ef, 0)
    }

    /// Every link points at an existing node.
    #[cfg(test)]
    pub fn is_consistent(&self) -> bool {
        let n = self.links.len() as u32;
        self.links
            .iter()
            .all(|levels| levels.iter().flatten().all(|&id| id < n))
    }
}
