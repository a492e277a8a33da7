use unicode_normalization::UnicodeNormalization;
use unicode_script::{Script, UnicodeScript};

const ZWJ: char = '\u{200D}';
const ZWNJ: char = '\u{200C}';

fn specific_script(c: char) -> Option<Script> {
    match c.script() {
        Script::Common | Script::Inherited | Script::Unknown => None,
        s => Some(s),
    }
}

fn is_joiner(c: char) -> bool {
    c == ZWJ || c == ZWNJ
}

/// Letters, digits, and script-specific marks (Bengali vowel signs, virama).
fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || specific_script(c).is_some()
}

fn same_script_pair(prev: Option<char>, next: Option<char>) -> bool {
    match (prev, next) {
        (Some(p), Some(n)) if !p.is_whitespace() && !n.is_whitespace() => {
            matches!((specific_script(p), specific_script(n)), (Some(a), Some(b)) if a == b)
        }
        _ => false,
    }
}

/// Map or drop single characters: line breaks, whitespace, controls and
/// invisible formatting artifacts. Joiners are kept for the next pass.
fn map_chars(input: &str) -> Vec<char> {
    let mut out = Vec::with_capacity(input.len());
    let mut chars = input.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '\r' => {
                if chars.peek() == Some(&'\n') {
                    chars.next();
                }
                out.push('\n');
            }
            '\n' | '\u{2028}' | '\u{2029}' | '\u{0085}' => out.push('\n'),
            // zero-width space, BOM, soft hyphen, word joiner
            '\u{200B}' | '\u{FEFF}' | '\u{00AD}' | '\u{2060}' => {}
            c if is_joiner(c) => out.push(c),
            c if c.is_whitespace() => out.push(' '),
            c if c.is_control() => {}
            c => out.push(c),
        }
    }
    out
}

fn filter_joiners(chars: &[char]) -> String {
    let mut out = String::with_capacity(chars.len() * 3);
    for (i, &c) in chars.iter().enumerate() {
        if is_joiner(c) {
            let prev = out.chars().next_back();
            let next = chars.get(i + 1).copied();
            if !same_script_pair(prev, next) {
                continue;
            }
        }
        out.push(c);
    }
    out
}

fn collapse_line(line: &str) -> String {
    let mut out = String::with_capacity(line.len());
    for word in line.split(' ').filter(|w| !w.is_empty()) {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

fn ends_with_hyphenated_word(line: &str) -> bool {
    let mut rev = line.chars().rev();
    matches!(rev.next(), Some('-' | '\u{2010}')) && rev.next().is_some_and(is_word_char)
}

/// Canonicalize extracted text.
///
/// NFC composition; CR/LF variants become `\n`; other whitespace runs
/// become one space; control characters and invisible artifacts are dropped;
/// ZWJ/ZWNJ survive only between characters of one script; lines are trimmed,
/// blank lines removed, and a word hyphenated across a line break is
/// rejoined.
pub fn normalize_text(raw: &str) -> String {
    let composed: String = raw.nfc().collect();
    let mapped = filter_joiners(&map_chars(&composed));

    let mut lines: Vec<String> = Vec::new();
    for line in mapped.split('\n').map(collapse_line) {
        if line.is_empty() {
            continue;
        }
        match lines.last_mut() {
            Some(prev)
                if ends_with_hyphenated_word(prev)
                    && line.chars().next().is_some_and(char::is_alphabetic) =>
            {
                prev.pop();
                prev.push_str(&line);
            }
            _ => lines.push(line),
        }
    }
    lines.join("\n").nfc().collect()
}
