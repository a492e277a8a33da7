use std::ops::Range;

use unicode_segmentation::UnicodeSegmentation;

use super::{chunk_id, Chunk, ChunkingConfig, CorpusError, SourceDocument};
use crate::text;

#[derive(Debug)]
enum UnitKind {
    Heading { level: usize, title: String },
    Sentence,
}

#[derive(Debug)]
struct Unit {
    span: Range<usize>,
    tokens: usize,
    kind: UnitKind,
}

#[derive(Debug, Clone)]
struct Draft {
    span: Range<usize>,
    tokens: usize,
    topic: String,
    section: usize,
}

/// `#`..`######` followed by a space and a title.
fn parse_heading(line: &str) -> Option<(usize, &str)> {
    let level = line.chars().take_while(|&c| c == '#').count();
    if !(1..=6).contains(&level) {
        return None;
    }
    let title = line[level..].strip_prefix(' ')?.trim();
    (!title.is_empty()).then_some((level, title))
}

fn units(text: &str) -> Vec<Unit> {
    let mut out = Vec::new();
    let mut block: Option<Range<usize>> = None;

    let flush = |block: &mut Option<Range<usize>>, out: &mut Vec<Unit>| {
        if let Some(b) = block.take() {
            for s in text::sentence_spans(&text[b.clone()]) {
                let span = b.start + s.start..b.start + s.end;
                out.push(Unit {
                    tokens: text::token_count(&text[span.clone()]),
                    span,
                    kind: UnitKind::Sentence,
                });
            }
        }
    };

    let mut offset = 0;
    for line in text.split('\n') {
        let span = offset..offset + line.len();
        offset = span.end + 1;
        if let Some((level, title)) = parse_heading(line.trim()) {
            flush(&mut block, &mut out);
            out.push(Unit {
                tokens: text::token_count(line),
                span,
                kind: UnitKind::Heading {
                    level,
                    title: title.to_owned(),
                },
            });
        } else if !line.trim().is_empty() {
            block = Some(match block {
                Some(b) => b.start..span.end,
                None => span,
            });
        }
    }
    flush(&mut block, &mut out);
    out
}

/// Split an over-long sentence at whitespace into pieces of at most
/// `max_tokens` tokens, the first at most `first_max`. A stretch with no
/// whitespace near the limit is cut at the next whitespace instead, so a
/// piece can only exceed the limit when the text offers no earlier break.
fn split_long(text: &str, span: Range<usize>, first_max: usize, max_tokens: usize) -> Vec<Range<usize>> {
    let words: Vec<usize> = text[span.clone()]
        .unicode_word_indices()
        .map(|(i, _)| span.start + i)
        .collect();
    let mut pieces = Vec::new();
    let mut start = span.start;
    let mut first_word = 0;
    loop {
        let limit = if pieces.is_empty() { first_max } else { max_tokens };
        if words.len() - first_word <= limit {
            break;
        }
        let boundary = words[first_word + limit];
        let before = text[start..boundary]
            .char_indices()
            .rev()
            .find(|&(i, c)| c.is_whitespace() && i > 0)
            .map(|(i, _)| start + i);
        let cut = before.or_else(|| {
            text[boundary..span.end]
                .char_indices()
                .find(|(_, c)| c.is_whitespace())
                .map(|(i, _)| boundary + i)
        });
        let Some(mut cut) = cut else { break };
        // back up to the start of the whitespace run
        while let Some(c) = text[..cut].chars().next_back().filter(|c| c.is_whitespace()) {
            cut -= c.len_utf8();
        }
        let next = text[cut..span.end]
            .char_indices()
            .find(|(_, c)| !c.is_whitespace())
            .map_or(span.end, |(i, _)| cut + i);
        pieces.push(start..cut);
        start = next;
        first_word = words.partition_point(|&w| w < start);
    }
    pieces.push(start..span.end);
    pieces
}

struct Packer<'a> {
    text: &'a str,
    cfg: &'a ChunkingConfig,
    done: Vec<Draft>,
    open: Option<Draft>,
    topic: String,
    section: usize,
}

impl Packer<'_> {
    fn close(&mut self) {
        if let Some(d) = self.open.take() {
            self.done.push(d);
        }
    }

    /// Merge an undersized section-final chunk into its same-section predecessor.
    fn finish_section(&mut self) {
        self.close();
        let n = self.done.len();
        if n >= 2 {
            let (last, prev) = (&self.done[n - 1], &self.done[n - 2]);
            if last.section == self.section
                && prev.section == self.section
                && last.tokens < self.cfg.min_terminal_tokens
            {
                let last = self.done.pop().expect("n >= 2");
                let prev = self.done.last_mut().expect("n >= 2");
                prev.span.end = last.span.end;
                prev.tokens += last.tokens;
            }
        }
    }

    fn start(&mut self, span: Range<usize>, tokens: usize) {
        self.open = Some(Draft {
            span,
            tokens,
            topic: self.topic.clone(),
            section: self.section,
        });
    }

    /// The open draft is the only chunk of its section so far and is too
    /// short to stand alone.
    fn open_is_stub(&self) -> bool {
        self.open.as_ref().is_some_and(|d| {
            d.tokens < self.cfg.min_terminal_tokens
                && self.done.last().is_none_or(|p| p.section != d.section)
        })
    }

    /// Carry an undersized section opening into the section that follows.
    fn carry_into(&mut self, heading: Range<usize>, tokens: usize) {
        let d = self.open.as_mut().expect("caller checked open_is_stub");
        d.span.end = heading.end;
        d.tokens += tokens;
        d.topic = self.topic.clone();
        d.section = self.section;
    }

    /// Final chunk of the document below `min_terminal_tokens` merges into
    /// its predecessor whatever section that belongs to.
    fn finish_document(&mut self) {
        self.finish_section();
        let n = self.done.len();
        if n >= 2 && self.done[n - 1].tokens < self.cfg.min_terminal_tokens {
            let last = self.done.pop().expect("n >= 2");
            let prev = self.done.last_mut().expect("n >= 2");
            prev.span.end = last.span.end;
            prev.tokens += last.tokens;
        }
    }

    fn push_sentence(&mut self, span: Range<usize>, tokens: usize) {
        let max = self.cfg.max_tokens;
        if tokens > max {
            // The open draft is topped up to `max` with the head of the
            // sentence; the rest is cut into `max`-sized pieces.
            let room = self.open.as_ref().map_or(0, |d| max.saturating_sub(d.tokens));
            let pieces = if room > 0 {
                split_long(self.text, span, room, max)
            } else {
                self.close();
                split_long(self.text, span, max, max)
            };
            for (i, piece) in pieces.into_iter().enumerate() {
                let t = text::token_count(&self.text[piece.clone()]);
                match &mut self.open {
                    Some(d) if i == 0 && room > 0 => {
                        d.span.end = piece.end;
                        d.tokens += t;
                    }
                    _ => {
                        self.close();
                        self.start(piece, t);
                    }
                }
            }
            return;
        }
        match &mut self.open {
            Some(d) if d.tokens + tokens <= self.cfg.max_tokens => {
                d.span.end = span.end;
                d.tokens += tokens;
            }
            _ => {
                self.close();
                self.start(span, tokens);
            }
        }
    }
}

/// Pack a normalized document into chunks.
///
/// Sentence units are packed greedily up to `max_tokens`; a sentence is only
/// split when it alone exceeds `max_tokens`, and then its head first fills
/// the open chunk. Every heading line closes the current chunk and begins
/// the next one, and the heading path becomes the topic of the chunks that
/// follow. Two exceptions keep undersized chunks out:
///
/// - a section whose only chunk is still below `min_terminal_tokens` when
///   the next heading arrives is carried into that section (the chunk takes
///   the later topic);
/// - a section-final chunk below `min_terminal_tokens` is merged into its
///   same-section predecessor, and the document's last chunk into whatever
///   precedes it. These merges are the only way a chunk can grow past
///   `max_tokens`.
///
/// Chunk texts are exact slices of `doc.raw_text`; consecutive chunks are
/// separated by whitespace only.
pub fn segment(doc: &SourceDocument, cfg: &ChunkingConfig) -> Result<Vec<Chunk>, CorpusError> {
    cfg.validate()?;
    let text = doc.raw_text.as_str();
    if text::token_count(text) == 0 {
        return Err(CorpusError::EmptyDocument(doc.doc_id.clone()));
    }

    let mut packer = Packer {
        text,
        cfg,
        done: Vec::new(),
        open: None,
        topic: String::new(),
        section: 0,
    };
    let mut path: Vec<(usize, String)> = Vec::new();
    for unit in units(text) {
        match unit.kind {
            UnitKind::Heading { level, title } => {
                let carry = packer.open_is_stub();
                if !carry {
                    packer.finish_section();
                }
                packer.section += 1;
                path.retain(|(l, _)| *l < level);
                path.push((level, title));
                packer.topic = path
                    .iter()
                    .map(|(_, t)| t.as_str())
                    .collect::<Vec<_>>()
                    .join(" > ");
                if carry {
                    packer.carry_into(unit.span, unit.tokens);
                } else {
                    packer.start(unit.span, unit.tokens);
                }
            }
            UnitKind::Sentence => packer.push_sentence(unit.span, unit.tokens),
        }
    }
    packer.finish_document();

    let count = packer.done.len();
    Ok(packer
        .done
        .into_iter()
        .enumerate()
        .map(|(i, d)| {
            let ordinal = i as u32;
            let body = &text[d.span];
            Chunk {
                chunk_id: chunk_id(&doc.doc_id, ordinal),
                doc_id: doc.doc_id.clone(),
                ordinal,
                token_count: text::token_count(body) as u32,
                text: body.to_owned(),
                topic: d.topic,
                structural_position: f64::from(ordinal) / count as f64,
                source_kind: doc.source_kind,
            }
        })
        .collect())
}
