//! Domain-term lexicon and fuzzy transcript repair.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;
use unicode_segmentation::UnicodeSegmentation;

use super::DialogueError;

pub const DEFAULT_MAX_NORM_DIST: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub canonical: String,
    #[serde(default)]
    pub variants: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Repair {
    pub from: String,
    pub to: String,
}

/// Validated lexicon. Every surface form (canonical or variant) maps to
/// exactly one canonical.
#[derive(Debug, Clone, Default)]
pub struct TermLexicon {
    entries: Vec<LexiconEntry>,
    forms: HashMap<String, usize>,
}

impl TermLexicon {
    /// Entries are stored in NFC so they compare equal to normalized text.
    pub fn new(entries: Vec<LexiconEntry>) -> Result<Self, DialogueError> {
        let entries: Vec<LexiconEntry> = entries
            .into_iter()
            .map(|e| LexiconEntry {
                canonical: e.canonical.nfc().collect(),
                variants: e.variants.iter().map(|v| v.nfc().collect()).collect(),
            })
            .collect();
        let mut forms: HashMap<String, usize> = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            if e.canonical.trim().is_empty() || e.canonical.split_whitespace().count() != 1 {
                return Err(DialogueError::InvalidLexicon(format!(
                    "entry {i}: canonical must be a single nonempty word"
                )));
            }
            for form in std::iter::once(&e.canonical).chain(&e.variants) {
                let key = form.to_lowercase();
                match forms.get(&key) {
                    Some(&j) if j != i => {
                        return Err(DialogueError::InvalidLexicon(format!(
                            "'{form}' maps to both '{}' and '{}'",
                            entries[j].canonical, e.canonical
                        )))
                    }
                    _ => {
                        forms.insert(key, i);
                    }
                }
            }
        }
        Ok(Self { entries, forms })
    }

    pub fn load(path: &Path) -> Result<Self, DialogueError> {
        let text = fs::read_to_string(path)
            .map_err(|e| DialogueError::InvalidLexicon(format!("{}: {e}", path.display())))?;
        let entries: Vec<LexiconEntry> = serde_json::from_str(&text)
            .map_err(|e| DialogueError::InvalidLexicon(format!("{}: {e}", path.display())))?;
        Self::new(entries)
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn exact(&self, token: &str) -> Option<&str> {
        self.forms
            .get(&token.to_lowercase())
            .map(|&i| self.entries[i].canonical.as_str())
    }

    /// Nearest canonical within `max_norm_dist`, measuring each entry by its
    /// closest surface form. Ties go to the lexicographically smaller
    /// canonical.
    fn nearest(&self, token: &str, max_norm_dist: f64) -> Option<&str> {
        let token = token.to_lowercase();
        let token_len = token.chars().count();
        let mut best: Option<(f64, &str)> = None;
        for e in &self.entries {
            let d = std::iter::once(&e.canonical)
                .chain(&e.variants)
                .map(|form| {
                    let form = form.to_lowercase();
                    let longest = token_len.max(form.chars().count());
                    strsim::levenshtein(&token, &form) as f64 / longest as f64
                })
                .fold(f64::INFINITY, f64::min);
            if d > max_norm_dist {
                continue;
            }
            let better = match best {
                None => true,
                Some((bd, bc)) => d < bd || (d == bd && e.canonical.as_str() < bc),
            };
            if better {
                best = Some((d, &e.canonical));
            }
        }
        best.map(|(_, c)| c)
    }
}

/// Replace misrecognised domain terms with their canonical spelling.
/// Whitespace and punctuation between words are preserved.
pub fn repair_transcript(text: &str, lexicon: &TermLexicon, max_norm_dist: f64) -> (String, Vec<Repair>) {
    let mut out = String::with_capacity(text.len());
    let mut repairs = Vec::new();
    for seg in text.split_word_bounds() {
        let is_word = seg.chars().any(char::is_alphabetic);
        let replacement = if is_word {
            lexicon
                .exact(seg)
                .or_else(|| lexicon.nearest(seg, max_norm_dist))
        } else {
            None
        };
        match replacement {
            Some(canonical) if canonical != seg => {
                repairs.push(Repair {
                    from: seg.to_owned(),
                    to: canonical.to_owned(),
                });
                out.push_str(canonical);
            }
            _ => out.push_str(seg),
        }
    }
    (out, repairs)
}
