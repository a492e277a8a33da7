//! Plain-text rendering of answers for speech synthesis.

use std::sync::LazyLock;

use regex::Regex;
use unicode_normalization::char::is_combining_mark;

use crate::text;

/// Sentences longer than this are split at clause punctuation.
pub const MAX_SPOKEN_TOKENS: usize = 30;
const KEPT_PUNCTUATION: &[char] = &['।', '.', '?', '!', ',', ';', ':'];
const CLAUSE_PUNCTUATION: &[char] = &[',', ';', ':'];

static BULLET: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*(?:[-*+•]|[0-9০-৯]+[.)])\s+").unwrap());
static HEADING: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*#{1,6}\s+").unwrap());
static LINK: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[([^\]\n]*)\]\([^)\n]*\)").unwrap());
static CITATION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[\d{1,3}\]").unwrap());
static SPACE_BEFORE_PUNCT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r" +([।.?!,;:])").unwrap());

fn is_bengali(text: &str) -> bool {
    text.chars().any(|c| ('\u{0980}'..='\u{09FF}').contains(&c))
}

fn terminator_for(text: &str) -> char {
    if is_bengali(text) {
        '।'
    } else {
        '.'
    }
}

fn keep(c: char) -> bool {
    c.is_alphabetic() || is_combining_mark(c) || c.is_numeric() || KEPT_PUNCTUATION.contains(&c)
}

fn clean_inline(line: &str) -> String {
    let line = LINK.replace_all(line, "$1");
    let line = CITATION.replace_all(&line, "");
    let filtered: String = line.chars().map(|c| if keep(c) { c } else { ' ' }).collect();
    let collapsed = filtered.split_whitespace().collect::<Vec<_>>().join(" ");
    SPACE_BEFORE_PUNCT.replace_all(&collapsed, "$1").into_owned()
}

fn ends_sentence(s: &str) -> bool {
    s.ends_with(|c| text::SENTENCE_TERMINATORS.contains(&c))
}

/// Cut an overlong sentence at clause punctuation, greedily packing clauses
/// up to the token limit.
fn split_sentence(sentence: &str, terminator: char) -> String {
    if text::token_count(sentence) <= MAX_SPOKEN_TOKENS {
        return sentence.to_owned();
    }
    let mut clauses = Vec::new();
    let mut start = 0;
    for (i, c) in sentence.char_indices() {
        let next = i + c.len_utf8();
        if CLAUSE_PUNCTUATION.contains(&c) && sentence[next..].starts_with(' ') {
            clauses.push(&sentence[start..next]);
            start = next + 1;
        }
    }
    clauses.push(&sentence[start..]);

    let mut out: Vec<String> = Vec::new();
    let mut current = String::new();
    for clause in clauses {
        let candidate = if current.is_empty() {
            clause.to_owned()
        } else {
            format!("{current} {clause}")
        };
        if !current.is_empty() && text::token_count(&candidate) > MAX_SPOKEN_TOKENS {
            out.push(std::mem::take(&mut current));
            current = clause.to_owned();
        } else {
            current = candidate;
        }
    }
    out.push(current);
    let last = out.len() - 1;
    out.iter()
        .enumerate()
        .map(|(i, piece)| {
            if i == last {
                piece.clone()
            } else {
                let mut p = piece.trim_end_matches(CLAUSE_PUNCTUATION).to_owned();
                p.push(terminator);
                p
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn pass(answer: &str) -> String {
    let terminator = terminator_for(answer);
    let mut lines = Vec::new();
    for raw in answer.lines() {
        let (body, is_item) = match BULLET.find(raw) {
            Some(m) => (&raw[m.end()..], true),
            None => (HEADING.find(raw).map_or(raw, |m| &raw[m.end()..]), false),
        };
        let mut line = clean_inline(body);
        if line.is_empty() {
            continue;
        }
        if is_item && !ends_sentence(&line) {
            line = line.trim_end_matches(CLAUSE_PUNCTUATION).to_owned();
            line.push(terminator);
        }
        lines.push(line);
    }
    let joined = lines.join(" ");
    let spans = text::sentence_spans(&joined);
    let mut out = Vec::with_capacity(spans.len());
    let mut cursor = 0;
    for span in spans {
        let gap = joined[cursor..span.start].trim();
        if !gap.is_empty() {
            out.push(gap.to_owned());
        }
        out.push(split_sentence(&joined[span.clone()], terminator));
        cursor = span.end;
    }
    let tail = joined[cursor..].trim();
    if !tail.is_empty() {
        out.push(tail.to_owned());
    }
    out.join(" ")
}

/// Strip markdown and citation markers, turn list items into sentences and
/// keep only letters, digits and sentence punctuation. Idempotent.
pub fn format_for_voice(answer: &str) -> String {
    let mut current = pass(answer);
    for _ in 0..8 {
        let next = pass(&current);
        if next == current {
            break;
        }
        current = next;
    }
    current
}
