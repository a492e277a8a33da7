use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::CorpusError;

/// Characters of context on each side of a match that a guard can see.
pub const GUARD_CONTEXT_CHARS: usize = 16;

/// One row of the OCR post-correction table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectionRule {
    pub pattern: String,
    pub replacement: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_guard: Option<String>,
}

impl CorrectionRule {
    pub fn new(pattern: impl Into<String>, replacement: impl Into<String>) -> Self {
        Self {
            pattern: pattern.into(),
            replacement: replacement.into(),
            context_guard: None,
        }
    }

    pub fn guarded(mut self, guard: impl Into<String>) -> Self {
        self.context_guard = Some(guard.into());
        self
    }
}

#[derive(Debug, Clone)]
struct CompiledRule {
    pattern: Regex,
    replacement: String,
    guard: Option<Regex>,
}

/// A validated, compiled list of correction rules, applied in order.
#[derive(Debug, Clone, Default)]
pub struct RuleSet {
    rules: Vec<CompiledRule>,
}

impl RuleSet {
    pub fn compile(rules: &[CorrectionRule]) -> Result<Self, CorpusError> {
        let mut compiled = Vec::with_capacity(rules.len());
        for (index, rule) in rules.iter().enumerate() {
            let invalid = |reason: String| CorpusError::InvalidRule { index, reason };
            if rule.pattern.is_empty() {
                return Err(invalid("empty pattern".into()));
            }
            let pattern = Regex::new(&rule.pattern).map_err(|e| invalid(e.to_string()))?;
            if pattern.is_match("") {
                return Err(invalid("pattern matches the empty string".into()));
            }
            if !rule.replacement.contains('$') && pattern.is_match(&rule.replacement) {
                return Err(invalid(format!(
                    "replacement {:?} matches its own pattern",
                    rule.replacement
                )));
            }
            let guard = rule
                .context_guard
                .as_deref()
                .map(Regex::new)
                .transpose()
                .map_err(|e| invalid(format!("context_guard: {e}")))?;
            compiled.push(CompiledRule {
                pattern,
                replacement: rule.replacement.clone(),
                guard,
            });
        }
        Ok(Self { rules: compiled })
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Apply every rule in list order; returns the corrected text and the
    /// total number of replacements.
    pub fn apply(&self, text: &str) -> (String, usize) {
        let mut current = text.to_owned();
        let mut total = 0;
        for rule in &self.rules {
            let (next, count) = apply_rule(rule, &current);
            current = next;
            total += count;
        }
        (current, total)
    }
}

fn char_floor(text: &str, from: usize, n: usize) -> usize {
    text[..from]
        .char_indices()
        .rev()
        .nth(n.saturating_sub(1))
        .map_or(0, |(i, _)| i)
}

fn char_ceil(text: &str, from: usize, n: usize) -> usize {
    text[from..]
        .char_indices()
        .nth(n)
        .map_or(text.len(), |(i, _)| from + i)
}

/// Guard window: the match plus up to [`GUARD_CONTEXT_CHARS`] on each side.
fn guard_window(text: &str, start: usize, end: usize) -> &str {
    let lo = if start == 0 { 0 } else { char_floor(text, start, GUARD_CONTEXT_CHARS) };
    &text[lo..char_ceil(text, end, GUARD_CONTEXT_CHARS)]
}

/// Leftmost-first scan. A candidate rejected by its guard does not consume
/// input: the search resumes one character after the candidate's start, so
/// an overlapping later candidate can still apply.
fn apply_rule(rule: &CompiledRule, text: &str) -> (String, usize) {
    let mut out = String::with_capacity(text.len());
    let mut copied = 0;
    let mut pos = 0;
    let mut count = 0;
    while pos <= text.len() {
        let Some(caps) = rule.pattern.captures_at(text, pos) else {
            break;
        };
        let m = caps.get(0).expect("group 0 always participates");
        let accepted = rule
            .guard
            .as_ref()
            .is_none_or(|g| g.is_match(guard_window(text, m.start(), m.end())));
        if accepted {
            out.push_str(&text[copied..m.start()]);
            caps.expand(&rule.replacement, &mut out);
            copied = m.end();
            pos = m.end();
            count += 1;
        } else {
            pos = m.start() + text[m.start()..].chars().next().map_or(1, char::len_utf8);
        }
    }
    out.push_str(&text[copied..]);
    (out, count)
}

/// Compile `rules` and apply them to `text`.
pub fn apply_corrections(
    text: &str,
    rules: &[CorrectionRule],
) -> Result<(String, usize), CorpusError> {
    Ok(RuleSet::compile(rules)?.apply(text))
}

/// Read a JSON array of correction rules.
pub fn load_rules(path: &Path) -> Result<Vec<CorrectionRule>, CorpusError> {
    let raw = std::fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    serde_json::from_str(&raw).map_err(|e| CorpusError::Parse {
        line: e.line(),
        message: e.to_string(),
    })
}
