mod common;

use advisor_core::embedding::embed;
use advisor_core::retrieval::{retrieve, KnowledgeBase, RetrievalConfig};
use advisor_core::HashingEmbedder;
use common::oracle::oracle;

#[test]
fn retrieve_equals_brute_force_fusion() {
    let provider = HashingEmbedder::new(384);
    let chunks = common::synthetic_chunks(100, 7);
    let kb = KnowledgeBase::new(common::build_index(&chunks, &provider));
    let cfg = RetrievalConfig::default();
    for q in common::QUERIES {
        let got = retrieve(q, &cfg, &kb, &provider).unwrap();
        let want = oracle(q, &chunks, &kb, &provider, &cfg);
        let got_ids: Vec<&str> = got.items.iter().map(|i| i.chunk_id.as_str()).collect();
        let want_ids: Vec<&str> = want.iter().map(|w| w.0.as_str()).collect();
        assert_eq!(got_ids, want_ids, "{q}");
        for (g, w) in got.items.iter().zip(&want) {
            assert!((g.fused - w.1).abs() < 1e-12, "{q}: {} vs {}", g.fused, w.1);
        }
    }
}

#[test]
fn semantic_only_weights_reproduce_ann_order() {
    let provider = HashingEmbedder::new(384);
    let chunks = common::synthetic_chunks(100, 11);
    let kb = KnowledgeBase::new(common::build_index(&chunks, &provider));
    let cfg = RetrievalConfig::with_weights(1.0, 0.0, 0.0);
    for q in common::QUERIES {
        let got = retrieve(q, &cfg, &kb, &provider).unwrap();
        let ann = kb.index.ann_search(&embed(&provider, q).unwrap(), cfg.k_final).unwrap();
        let a: Vec<&str> = got.items.iter().map(|i| i.chunk_id.as_str()).collect();
        let b: Vec<&str> = ann.iter().map(|h| h.chunk_id.as_str()).collect();
        assert_eq!(a, b, "{q}");
    }
}

#[test]
fn topic_queries_prefer_their_topic() {
    let provider = HashingEmbedder::new(384);
    let chunks = common::synthetic_chunks(100, 3);
    let kb = KnowledgeBase::new(common::build_index(&chunks, &provider));
    let got = retrieve("আলু মড়ক ম্যানকোজেব", &RetrievalConfig::default(), &kb, &provider).unwrap();
    assert_eq!(got.items[0].topic, "আলু > রোগ");
}

#[test]
fn empty_inputs_are_rejected() {
    let provider = HashingEmbedder::new(64);
    let kb = KnowledgeBase::new(advisor_core::VectorIndex::with_defaults(64, "fallback"));
    let cfg = RetrievalConfig::default();
    assert!(matches!(
        retrieve("ধান", &cfg, &kb, &provider),
        Err(advisor_core::retrieval::RetrievalError::EmptyIndex)
    ));
    assert!(matches!(
        retrieve("  ", &cfg, &kb, &provider),
        Err(advisor_core::retrieval::RetrievalError::EmptyQuery)
    ));
}
