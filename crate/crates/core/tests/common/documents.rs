//! Generated documents with known structure, and chunk invariants.

use advisor_core::{Chunk, ChunkingConfig, SourceDocument, SourceKind};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub enum Unit {
    Heading { level: usize, title: String, tokens: usize },
    Sentence(usize),
}

/// A document as a unit list plus its rendered text. Words are distinct
/// single tokens, sentences end with a danda, headings are unique.
pub fn generate(rng: &mut ChaCha8Rng, target_tokens: usize, headings: usize, long_sentences: bool) -> (Vec<Unit>, String) {
    let mut units = Vec::new();
    let mut heading_at: Vec<usize> = (0..headings).map(|_| rng.random_range(0..target_tokens)).collect();
    heading_at.sort_unstable();
    let mut produced = 0;
    let mut word = 0usize;
    let mut next_heading = 0;
    while produced < target_tokens {
        while next_heading < heading_at.len() && heading_at[next_heading] <= produced {
            let level = rng.random_range(1..=3);
            units.push(Unit::Heading {
                level,
                title: format!("অধ্যায়{next_heading}"),
                tokens: 1,
            });
            next_heading += 1;
        }
        let len = if long_sentences && rng.random_bool(0.01) {
            rng.random_range(301..700)
        } else {
            rng.random_range(1..=25)
        };
        units.push(Unit::Sentence(len));
        produced += len;
    }
    let mut text = String::new();
    let mut paragraph = false;
    for u in &units {
        match u {
            Unit::Heading { level, title, .. } => {
                if !text.is_empty() {
                    text.push('\n');
                }
                text.push_str(&format!("{} {title}\n", "#".repeat(*level)));
                paragraph = false;
            }
            Unit::Sentence(n) => {
                if paragraph {
                    text.push(if rng.random_bool(0.2) { '\n' } else { ' ' });
                }
                let words: Vec<String> = (0..*n)
                    .map(|_| {
                        word += 1;
                        format!("শব্দ{word}")
                    })
                    .collect();
                text.push_str(&words.join(" "));
                text.push('।');
                paragraph = true;
            }
        }
    }
    (units, text)
}

pub fn doc(id: &str, text: String) -> SourceDocument {
    SourceDocument {
        doc_id: id.into(),
        title: id.into(),
        source_kind: SourceKind::Handbook,
        language: "bn".into(),
        raw_text: text,
        provenance: String::new(),
    }
}

/// Every chunk holds `[min_tokens, max_tokens]` tokens, except that a
/// section-final chunk may hold `[min_terminal_tokens, max_tokens +
/// min_terminal_tokens)`, the document's last chunk up to two undersized
/// tails more than `max_tokens`, and a single-chunk document anything.
pub fn within_bounds(chunks: &[Chunk], cfg: &ChunkingConfig) -> bool {
    let n = chunks.len();
    n == 1
        || chunks.iter().enumerate().all(|(i, c)| {
            let t = c.token_count as usize;
            let section_final = chunks.get(i + 1).is_none_or(|n| n.topic != c.topic);
            let tails = if i + 1 == n { 2 } else { 1 };
            (cfg.min_tokens..=cfg.max_tokens).contains(&t)
                || (section_final
                    && (cfg.min_terminal_tokens..cfg.max_tokens + tails * cfg.min_terminal_tokens).contains(&t))
        })
}

/// Chunks are exact slices of the source, in order, separated by whitespace.
pub fn reassembles(text: &str, chunks: &[Chunk]) -> bool {
    let mut rest = text;
    for c in chunks {
        rest = rest.trim_start();
        match rest.strip_prefix(c.text.as_str()) {
            Some(r) => rest = r,
            None => return false,
        }
    }
    rest.trim().is_empty()
}
