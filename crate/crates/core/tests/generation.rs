mod common;

use std::sync::Arc;

use advisor_core::generation::{
    build_prompt, format_for_voice, grounding_check, render_block, ChatBackend, ChatRequest,
    ContextBlock, GenerationError, Generator, GroundingConfig, PromptLimits, PromptTemplate,
    SamplingConfig, StubBackend, StubMode,
};
use advisor_core::retrieval::{retrieve, KnowledgeBase, RankedItem, RetrievalConfig, RetrievalResult, Timings};
use advisor_core::text::token_count;
use advisor_core::HashingEmbedder;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn result(blocks: &[(&str, &str)]) -> RetrievalResult {
    RetrievalResult {
        query: String::new(),
        items: blocks
            .iter()
            .enumerate()
            .map(|(i, (id, text))| RankedItem {
                chunk_id: (*id).into(),
                text: (*text).into(),
                topic: String::new(),
                semantic: 1.0,
                lexical: 0.0,
                metadata_boost: 0.0,
                fused: 1.0 - 0.01 * i as f64,
                semantic_raw: 1.0,
                lexical_raw: 0.0,
            })
            .collect(),
        timings: Timings::default(),
    }
}

#[test]
fn chat_request_matches_golden_file() {
    let r = result(&[
        ("doc-a-0000", "বোরো ধানে ইউরিয়া তিন কিস্তিতে দিন।"),
        ("doc-b-0003", "শেষ কিস্তি থোড় আসার আগে দিন।"),
    ]);
    let bundle = build_prompt(
        "বোরো ধানে ইউরিয়া কখন দেব?",
        &r,
        &[],
        &PromptLimits::default(),
        512,
        &PromptTemplate::default(),
    )
    .unwrap();
    let sampling = SamplingConfig {
        seed: Some(42),
        ..SamplingConfig::default()
    };
    let body = serde_json::to_string_pretty(&ChatRequest::from_bundle("advisor-4b", &bundle, &sampling)).unwrap();
    let golden = include_str!("golden/chat_request_two_blocks.json");
    assert_eq!(format!("{body}\n"), golden);
}

#[test]
fn included_blocks_equal_greedy_simulation() {
    let template = PromptTemplate::default();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for case in 0..200 {
        let n = rng.random_range(1..=8);
        let texts: Vec<String> = (0..n)
            .map(|_| vec!["শব্দ"; rng.random_range(5..400)].join(" "))
            .collect();
        let blocks: Vec<(String, String)> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| (format!("doc{case}-{i:04}"), t.clone()))
            .collect();
        let refs: Vec<(&str, &str)> = blocks.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        let limits = PromptLimits {
            context_limit: rng.random_range(100..2500),
            history_turns: 6,
        };
        let max_out = 64;
        let budget = limits.context_limit - max_out;

        let mut used = token_count(&template.system)
            + token_count(&template.body.replace("{context}", "").replace("{question}", "q").replace("{history}", "(none)"));
        let mut expected = Vec::new();
        for (i, (id, text)) in blocks.iter().enumerate() {
            let cost = token_count(&render_block(i + 1, &ContextBlock { chunk_id: id.clone(), text: text.clone() }));
            if used + cost > budget {
                break;
            }
            used += cost;
            expected.push(id.clone());
        }

        match build_prompt("q", &result(&refs), &[], &limits, max_out, &template) {
            Ok(b) => {
                let got: Vec<String> = b.context_blocks.iter().map(|c| c.chunk_id.clone()).collect();
                assert_eq!(got, expected, "case {case}");
                assert_eq!(b.prompt_tokens, used, "case {case}");
                assert!(b.prompt_tokens <= budget);
            }
            Err(GenerationError::ContextBudgetExhausted { .. }) => assert!(expected.is_empty(), "case {case}"),
            Err(e) => panic!("{e}"),
        }
    }
}

/// Support values worked out by hand. Block A content words: বোরো ধানে
/// ইউরিয়া তিন কিস্তিতে দিন. Block B: পাটের বীজ বপনের শোধন করুন (আগে is a
/// stopword).
#[test]
fn support_matches_hand_counts() {
    let blocks = vec![
        ContextBlock { chunk_id: "a".into(), text: "বোরো ধানে ইউরিয়া তিন কিস্তিতে দিন।".into() },
        ContextBlock { chunk_id: "b".into(), text: "পাটের বীজ বপনের আগে শোধন করুন।".into() },
    ];
    let cases: [(&str, f64); 10] = [
        ("বোরো ধানে ইউরিয়া তিন কিস্তিতে দিন।", 1.0),
        ("ধানে ইউরিয়া দিন।", 1.0),
        ("ধানে পটাশ দিন।", 2.0 / 3.0),
        ("মাছের পুকুরে চুন দিন।", 1.0 / 4.0),
        ("মাছের পুকুরে চুন ছিটান।", 0.0),
        ("পাটের বীজ শোধন করুন।", 1.0),
        ("বীজ বপনের আগে জমি চাষ করুন।", 3.0 / 5.0),
        ("এবং এই আর।", 1.0),
        ("ইউরিয়া ও বীজ।", 1.0 / 2.0),
        ("Urea তিন কিস্তি।", 1.0 / 3.0),
    ];
    for (sentence, support) in cases {
        let r = grounding_check(sentence, &blocks, &GroundingConfig::default());
        assert_eq!(r.sentences.len(), 1, "{sentence}");
        assert!((r.sentences[0].support - support).abs() < 1e-12, "{sentence}: {}", r.sentences[0].support);
        assert_eq!(r.sentences[0].flagged, support < 0.2);
    }
}

#[test]
fn injected_sentence_is_the_only_flag() {
    let blocks = vec![ContextBlock {
        chunk_id: "a".into(),
        text: "বোরো ধানে ইউরিয়া তিন কিস্তিতে দিন। প্রথম কিস্তি চারা রোপণের পনেরো দিন পর দিন। শেষ কিস্তি থোড় আসার আগে দিন।".into(),
    }];
    let answer = "বোরো ধানে ইউরিয়া তিন কিস্তিতে দিন। মাছের পুকুরে চুন ছিটান। শেষ কিস্তি থোড় আসার আগে দিন। [1]";
    let r = grounding_check(answer, &blocks, &GroundingConfig::default());
    let flagged: Vec<&str> = r.sentences.iter().filter(|s| s.flagged).map(|s| s.sentence.as_str()).collect();
    assert_eq!(flagged, ["মাছের পুকুরে চুন ছিটান।"]);
    assert!(!r.disclaimer_added);
}

#[test]
fn voice_bullets_become_ordered_sentences() {
    let md = "সেচের নিয়ম:\n- জমিতে ২ থেকে ৩ সেন্টিমিটার পানি রাখুন\n- **পানি শুকালে** আবার সেচ দিন\n- ফুল আসার সময় পানির ঘাটতি রাখবেন না [2]";
    assert_eq!(
        format_for_voice(md),
        "সেচের নিয়ম: জমিতে ২ থেকে ৩ সেন্টিমিটার পানি রাখুন। পানি শুকালে আবার সেচ দিন। ফুল আসার সময় পানির ঘাটতি রাখবেন না।"
    );
}

#[test]
fn stub_pipeline_is_deterministic_end_to_end() {
    let provider = HashingEmbedder::new(384);
    let chunks = common::synthetic_chunks(60, 5);
    let kb = KnowledgeBase::new(common::build_index(&chunks, &provider));
    let generator = Generator {
        sampling: SamplingConfig { seed: Some(7), ..SamplingConfig::default() },
        ..Generator::new(Arc::new(StubBackend::new(0)))
    };
    let run = || {
        let r = retrieve(common::QUERIES[1], &RetrievalConfig::default(), &kb, &provider).unwrap();
        let (bundle, result) = generator.answer(common::QUERIES[1], &r, &[]).unwrap();
        assert!(!result.citations.is_empty());
        serde_json::to_string(&(r.items, bundle, result)).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn stub_answer_contains_first_block_sentence() {
    let r = result(&[("x-0000", "পুকুরে প্রতি শতাংশে এক কেজি চুন দিন। তারপর পানি দিন।"), ("y-0000", "অন্য কথা।")]);
    let g = Generator::new(Arc::new(StubBackend::new(3)));
    let (_, res) = g.answer("চুন কত দেব?", &r, &[]).unwrap();
    assert!(res.answer_text.contains("পুকুরে প্রতি শতাংশে এক কেজি চুন দিন।"));
    assert_eq!(res.citations, ["x-0000"]);
    assert!(!res.voice_ready_text.contains('['));
}

#[test]
fn backend_failures_surface_as_errors() {
    let r = result(&[("x-0000", "চুন দিন।")]);
    for (mode, unavailable) in [(StubMode::Unavailable, true), (StubMode::Refuse, false)] {
        let backend = StubBackend::new(0).with_mode(mode);
        assert!(backend.health().is_ok() != unavailable);
        let err = Generator::new(Arc::new(backend)).answer("q", &r, &[]).unwrap_err();
        assert!(err.is_upstream());
        assert_eq!(matches!(err, GenerationError::BackendUnavailable { .. }), unavailable);
    }
}
