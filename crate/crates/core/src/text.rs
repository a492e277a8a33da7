//! Tokens, sentences and content words shared by every stage.
//!
//! A token is a UAX #29 word: a run of letters (with their combining marks)
//! or digits. Punctuation and whitespace never count.

use std::borrow::Cow;
use std::ops::Range;

use unicode_normalization::{is_nfc, UnicodeNormalization};
use unicode_segmentation::UnicodeSegmentation;

/// Sentence-final marks. A mark only ends a sentence when followed by
/// whitespace or the end of the text, so "3.5" stays one token run.
pub const SENTENCE_TERMINATORS: [char; 4] = ['।', '.', '?', '!'];

pub fn tokens(text: &str) -> impl Iterator<Item = &str> {
    text.unicode_words()
}

pub fn token_count(text: &str) -> usize {
    text.unicode_words().count()
}

/// NFC, lowercased tokens: the form used for lexical matching.
pub fn normalized_tokens(text: &str) -> Vec<String> {
    let text: Cow<str> = if is_nfc(text) {
        Cow::Borrowed(text)
    } else {
        Cow::Owned(text.nfc().collect())
    };
    text.unicode_words().map(str::to_lowercase).collect()
}

/// Byte spans of sentences in `text`, trimmed of surrounding whitespace.
pub fn sentence_spans(text: &str) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    let mut start: Option<usize> = None;
    let mut iter = text.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        if start.is_none() {
            if c.is_whitespace() {
                continue;
            }
            start = Some(i);
        }
        if SENTENCE_TERMINATORS.contains(&c) {
            let at_boundary = match iter.peek() {
                None => true,
                Some((_, next)) => next.is_whitespace(),
            };
            if at_boundary {
                let end = i + c.len_utf8();
                spans.push(start.take().unwrap_or(i)..end);
            }
        }
    }
    if let Some(s) = start {
        let end = text.trim_end().len();
        if end > s {
            spans.push(s..end);
        }
    }
    spans
}

pub fn sentences(text: &str) -> Vec<&str> {
    sentence_spans(text).into_iter().map(|r| &text[r]).collect()
}

const STOPWORDS: &[&str] = &[
    // Bengali function words
    "এবং", "ও", "বা", "কিন্তু", "যে", "এই", "সেই", "এ", "তা", "তার", "তাদের", "করে", "করা", "করতে",
    "হয়", "হবে", "হলে", "হতে", "থেকে", "জন্য", "দিয়ে", "সাথে", "সঙ্গে", "না", "কি", "কী", "আর",
    "একটি", "এক", "যা", "যদি", "তবে", "তাহলে", "এর", "কে", "তে", "আছে", "ছিল", "প্রতি", "মধ্যে",
    "উপর", "পর", "আগে", "খুব", "বেশ", "অনেক", "সব", "কোন", "কোনো", "আপনি", "আপনার", "আমি",
    "আমার", "আমরা", "তিনি", "এটি", "এটা", "ওই", "যেমন", "হিসেবে",
    // English function words
    "a", "an", "and", "are", "as", "at", "be", "by", "for", "from", "in", "is", "it", "of", "on",
    "or", "that", "the", "this", "to", "was", "were", "with",
];

pub fn is_stopword(token: &str) -> bool {
    STOPWORDS.contains(&token)
}

/// Lowercased tokens minus stopwords.
pub fn content_words(text: &str) -> Vec<String> {
    normalized_tokens(text)
        .into_iter()
        .filter(|t| !is_stopword(t))
        .collect()
}
