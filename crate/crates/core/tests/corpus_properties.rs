use advisor_core::corpus::{
    from_markdown, normalize_text, segment, to_markdown, CorrectionRule, RuleSet,
};
mod common;

use advisor_core::{Chunk, ChunkingConfig, SourceKind};
use common::documents::{doc, generate, reassembles, within_bounds, Unit};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Expected chunk sizes from a direct simulation of the packing rules.
fn simulate(units: &[Unit], cfg: &ChunkingConfig) -> Vec<usize> {
    let mut done: Vec<(usize, usize)> = Vec::new(); // (tokens, section)
    let mut open: Option<(usize, usize)> = None;
    let mut section = 0;
    let merge_last = |done: &mut Vec<(usize, usize)>, same_section_only: bool| {
        let n = done.len();
        if n >= 2
            && done[n - 1].0 < cfg.min_terminal_tokens
            && (!same_section_only || done[n - 1].1 == done[n - 2].1)
        {
            let last = done.pop().unwrap();
            done.last_mut().unwrap().0 += last.0;
        }
    };
    for u in units {
        match u {
            Unit::Heading { tokens, .. } => {
                let lone_stub = open.is_some_and(|o| {
                    o.0 < cfg.min_terminal_tokens && done.last().is_none_or(|d| d.1 != o.1)
                });
                section += 1;
                if lone_stub {
                    let o = open.as_mut().unwrap();
                    o.0 += tokens;
                    o.1 = section;
                } else {
                    if let Some(o) = open.take() {
                        done.push(o);
                        merge_last(&mut done, true);
                    }
                    open = Some((*tokens, section));
                }
            }
            Unit::Sentence(n) if *n > cfg.max_tokens => {
                let mut left = *n;
                if let Some(mut o) = open.take() {
                    let room = cfg.max_tokens - o.0;
                    o.0 += room;
                    left -= room;
                    done.push(o);
                }
                while left > cfg.max_tokens {
                    done.push((cfg.max_tokens, section));
                    left -= cfg.max_tokens;
                }
                open = Some((left, section));
            }
            Unit::Sentence(n) => match &mut open {
                Some(o) if o.0 + n <= cfg.max_tokens => o.0 += n,
                _ => {
                    if let Some(o) = open.take() {
                        done.push(o);
                    }
                    open = Some((*n, section));
                }
            },
        }
    }
    if let Some(o) = open.take() {
        done.push(o);
    }
    merge_last(&mut done, true);
    merge_last(&mut done, false);
    done.into_iter().map(|d| d.0).collect()
}

#[test]
fn segmentation_matches_greedy_simulation() {
    let cfg = ChunkingConfig::default();
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (units, text) = generate(&mut rng, 5_000, 12, true);
        let d = doc("sim", normalize_text(&text));
        let chunks = segment(&d, &cfg).unwrap();
        let got: Vec<usize> = chunks.iter().map(|c| c.token_count as usize).collect();
        assert_eq!(got, simulate(&units, &cfg), "seed {seed}");
        assert!(reassembles(&d.raw_text, &chunks), "seed {seed}");
    }
}

#[test]
fn topics_follow_heading_paths() {
    let body = |w: &str| vec![w; 60].join(" ") + "।";
    let text = format!(
        "# ধান\n{}\n## রোগ\n{}\n### দমন\n{}\n## পোকা\n{}\n# পাট\n{}",
        body("ভূমিকা"),
        body("ব্লাস্ট"),
        body("ছত্রাকনাশক"),
        body("মাজরা"),
        body("বীজ")
    );
    let chunks = segment(&doc("t", text), &ChunkingConfig::default()).unwrap();
    let topics: Vec<&str> = chunks.iter().map(|c| c.topic.as_str()).collect();
    assert_eq!(topics, ["ধান", "ধান > রোগ", "ধান > রোগ > দমন", "ধান > পোকা", "পাট"]);
}

fn markdown_chunk() -> impl Strategy<Value = Chunk> {
    (
        "[a-z0-9_-]{1,12}",
        0u32..5000,
        "\\PC{1,200}",
        "[\\PC&&[^\\n]]{0,30}",
        0.0f64..1.0,
        prop::sample::select(vec![SourceKind::Handbook, SourceKind::Manual, SourceKind::Bulletin]),
    )
        .prop_map(|(doc_id, ordinal, text, topic, pos, kind)| Chunk {
            chunk_id: format!("{doc_id}-{ordinal:04}"),
            doc_id,
            ordinal,
            token_count: advisor_core::text::token_count(&text) as u32,
            text,
            topic,
            structural_position: pos,
            source_kind: kind,
        })
}

proptest! {
    #[test]
    fn normalization_is_idempotent(s in "[\\PC\\s\u{200B}\u{200C}\u{200D}\u{00AD}\r-]{0,120}") {
        let once = normalize_text(&s);
        prop_assert_eq!(normalize_text(&once), once);
    }

    #[test]
    fn corrections_are_idempotent_when_replacements_are_canonical(s in "[ধাণনসরকি ।]{0,80}") {
        let rules = RuleSet::compile(&[
            CorrectionRule::new("ধাণ", "ধান"),
            CorrectionRule::new("সাড়", "সার"),
        ])
        .unwrap();
        let (once, _) = rules.apply(&normalize_text(&s));
        let (twice, n) = rules.apply(&once);
        prop_assert_eq!(n, 0);
        prop_assert_eq!(twice, once);
    }

    #[test]
    fn markdown_round_trips(chunks in prop::collection::vec(markdown_chunk(), 100)) {
        for c in &chunks {
            prop_assert_eq!(&from_markdown(&to_markdown(c)).unwrap(), c);
        }
    }

    #[test]
    fn generated_documents_respect_bounds(seed in any::<u64>()) {
        let cfg = ChunkingConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let target = rng.random_range(100..3000);
        let headings = rng.random_range(0..6);
        let (_, text) = generate(&mut rng, target, headings, false);
        let d = doc("g", normalize_text(&text));
        let chunks = segment(&d, &cfg).unwrap();
        prop_assert!(reassembles(&d.raw_text, &chunks));
        prop_assert!(within_bounds(&chunks, &cfg), "{:?}", chunks.iter().map(|c| c.token_count).collect::<Vec<_>>());
    }
}
