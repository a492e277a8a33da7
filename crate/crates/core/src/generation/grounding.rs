//! Sentence-level support of an answer by its context blocks.

use std::collections::HashSet;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::prompt::ContextBlock;
use crate::text;

pub const DEFAULT_SUPPORT_THRESHOLD: f64 = 0.2;
pub const DEFAULT_DISCLAIMER_FRACTION: f64 = 0.4;

/// Appended when too much of an answer is unsupported or it degenerates.
pub const UNCERTAINTY_DISCLAIMER: &str =
    "এই উত্তরের কিছু অংশ প্রদত্ত তথ্য দ্বারা সমর্থিত নয়, তাই একজন কৃষি কর্মকর্তার সাথে পরামর্শ করুন।";

static CITATION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[(\d{1,3})\]").unwrap());

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GroundingConfig {
    pub support_threshold: f64,
    /// Fraction of flagged sentences above which the disclaimer is appended.
    pub disclaimer_fraction: f64,
}

impl Default for GroundingConfig {
    fn default() -> Self {
        Self {
            support_threshold: DEFAULT_SUPPORT_THRESHOLD,
            disclaimer_fraction: DEFAULT_DISCLAIMER_FRACTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceSupport {
    pub sentence: String,
    pub support: f64,
    pub flagged: bool,
    /// Rank (1-based) of the best supporting block, if any overlap exists.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub best_block: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingReport {
    pub answer_text: String,
    pub sentences: Vec<SentenceSupport>,
    pub disclaimer_added: bool,
}

impl GroundingReport {
    pub fn flagged_count(&self) -> usize {
        self.sentences.iter().filter(|s| s.flagged).count()
    }
}

pub fn strip_citations(answer: &str) -> String {
    let stripped = CITATION.replace_all(answer, "");
    stripped.split(' ').filter(|w| !w.is_empty()).collect::<Vec<_>>().join(" ")
}

/// 1-based block numbers cited in the answer, in order of first appearance.
pub fn cited_ranks(answer: &str) -> Vec<usize> {
    let mut seen = HashSet::new();
    CITATION
        .captures_iter(answer)
        .filter_map(|c| c[1].parse().ok())
        .filter(|n| seen.insert(*n))
        .collect()
}

fn word_set(text: &str) -> HashSet<String> {
    text::content_words(text).into_iter().collect()
}

/// Support of one sentence: the best block's share of the sentence's content
/// words. A sentence without content words makes no checkable claim and is
/// fully supported.
pub fn sentence_support(sentence: &str, blocks: &[HashSet<String>]) -> (f64, Option<usize>) {
    let words = word_set(sentence);
    if words.is_empty() {
        return (1.0, None);
    }
    let mut best = (0.0, None);
    for (i, b) in blocks.iter().enumerate() {
        let overlap = words.iter().filter(|w| b.contains(*w)).count();
        let support = overlap as f64 / words.len() as f64;
        if overlap > 0 && support > best.0 {
            best = (support, Some(i + 1));
        }
    }
    best
}

pub fn grounding_check(answer: &str, blocks: &[ContextBlock], cfg: &GroundingConfig) -> GroundingReport {
    let block_words: Vec<HashSet<String>> = blocks.iter().map(|b| word_set(&b.text)).collect();
    let plain = strip_citations(answer);
    let sentences: Vec<SentenceSupport> = text::sentences(&plain)
        .into_iter()
        .map(|s| {
            let (support, best_block) = sentence_support(s, &block_words);
            SentenceSupport {
                sentence: s.to_owned(),
                support,
                flagged: support < cfg.support_threshold,
                best_block,
            }
        })
        .collect();
    let flagged = sentences.iter().filter(|s| s.flagged).count();
    let disclaimer_added =
        !sentences.is_empty() && flagged as f64 / sentences.len() as f64 > cfg.disclaimer_fraction;
    GroundingReport {
        answer_text: if disclaimer_added {
            append_disclaimer(answer)
        } else {
            answer.to_owned()
        },
        sentences,
        disclaimer_added,
    }
}

pub fn append_disclaimer(answer: &str) -> String {
    let answer = answer.trim_end();
    if answer.ends_with(UNCERTAINTY_DISCLAIMER) {
        return answer.to_owned();
    }
    if answer.is_empty() {
        UNCERTAINTY_DISCLAIMER.to_owned()
    } else {
        format!("{answer} {UNCERTAINTY_DISCLAIMER}")
    }
}

/// Fewer than three occurrences of every token 12-gram.
pub fn is_coherent(answer: &str) -> bool {
    const N: usize = 12;
    let toks = text::normalized_tokens(answer);
    if toks.is_empty() {
        return false;
    }
    let mut counts = std::collections::HashMap::new();
    for w in toks.windows(N) {
        let c = counts.entry(w).or_insert(0usize);
        *c += 1;
        if *c > 2 {
            return false;
        }
    }
    true
}
