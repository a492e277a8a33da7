mod common;

use std::sync::Arc;

use advisor_service::api::{Health, QueryResponse};
use advisor_service::config::BackendKind;
use advisor_service::AppState;
use axum::http::StatusCode;
use common::*;

fn golden_request(name: &str) -> String {
    std::fs::read_to_string(fixtures().join("golden").join(name)).unwrap()
}

#[tokio::test]
async fn health_reports_each_component() {
    let dir = tempfile::tempdir().unwrap();
    let state = fixture_state(dir.path());
    let r = call(&state, "GET", "/health", None).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.body, r#"{"index":"ok","backend":"ok","provider":"ok"}"#);
}

#[tokio::test]
async fn query_matches_golden_response() {
    let dir = tempfile::tempdir().unwrap();
    let state = fixture_state(dir.path());
    let r = call(&state, "POST", "/query", Some(golden_request("query_request.json"))).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.body);
    let resp: QueryResponse = serde_json::from_str(&r.body).unwrap();
    assert!(!resp.citations.is_empty());
    for c in &resp.citations {
        assert!(resp.evidence.iter().any(|e| &e.chunk_id == c));
    }
    for w in resp.evidence.windows(2) {
        assert!(w[0].fused >= w[1].fused);
    }
    assert_eq!(resp.grounding.flagged, 0);
    check_golden("query_response.json", &(serde_json::to_string_pretty(&r.json()).unwrap() + "\n"));
}

#[tokio::test]
async fn restart_on_the_same_index_reproduces_responses() {
    let dir = tempfile::tempdir().unwrap();
    let first = fixture_state(dir.path());
    let a = call(&first, "POST", "/query", Some(golden_request("query_request.json"))).await;
    drop(first);
    // The second build loads the index the first one saved.
    assert!(dir.path().join("index/index.meta.json").is_file());
    let second = Arc::new(AppState::build(fixture_config(dir.path())).unwrap());
    let b = call(&second, "POST", "/query", Some(golden_request("query_request.json"))).await;
    assert_eq!(a.status, StatusCode::OK);
    assert_eq!(a.body, b.body);
}

#[tokio::test]
async fn bad_queries_are_client_errors() {
    let dir = tempfile::tempdir().unwrap();
    let state = fixture_state(dir.path());
    let r = call(&state, "POST", "/query", Some(r#"{"question": "  "}"#.into())).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.json()["error"], "empty_query");
    let r = call(&state, "POST", "/query", Some(r#"{"q": "ধান"}"#.into())).await;
    assert!(r.status.is_client_error());
}

#[tokio::test]
async fn voice_turn_matches_golden_and_session_is_inspectable() {
    let dir = tempfile::tempdir().unwrap();
    let state = fixture_state(dir.path());
    let r = call(&state, "POST", "/voice/turn", Some(golden_request("voice_turn_request.json"))).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.body);
    let v = r.json();
    assert_eq!(v["repairs"][0]["to"], "চুন");
    check_golden("voice_turn_response.json", &(serde_json::to_string_pretty(&v).unwrap() + "\n"));

    let s = call(&state, "GET", "/voice/session/golden-voice-1", None).await;
    assert_eq!(s.status, StatusCode::OK);
    let s = s.json();
    assert_eq!(s["turns"].as_array().unwrap().len(), 2);
    assert_eq!(s["state"], "open");

    assert_eq!(call(&state, "DELETE", "/voice/session/golden-voice-1", None).await.status, StatusCode::NO_CONTENT);
    assert_eq!(call(&state, "GET", "/voice/session/golden-voice-1", None).await.status, StatusCode::NOT_FOUND);
    assert_eq!(call(&state, "DELETE", "/voice/session/golden-voice-1", None).await.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn empty_transcript_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let state = fixture_state(dir.path());
    let r = call(&state, "POST", "/voice/turn", Some(r#"{"session_id": "x", "transcript": " "}"#.into())).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.json()["error"], "empty_transcript");
}

#[tokio::test]
async fn malformed_manifest_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let state = fixture_state(dir.path());
    let r = call(&state, "POST", "/ingest", Some("[{\"doc_id\": \"a\",\n \"title\": }]".into())).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    let v = r.json();
    assert_eq!(v["error"], "parse_error");
    assert_eq!(v["line"], 2);
    let r = call(&state, "POST", "/ingest", Some(r#"[{"doc_id": "Bad Id", "title": "t", "source_kind": "manual", "raw_text": "ধান।"}]"#.into())).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.json()["error"], "invalid_document");
}

#[tokio::test]
async fn ingest_swaps_in_a_larger_index() {
    let dir = tempfile::tempdir().unwrap();
    let state = fixture_state(dir.path());
    let before = state.advisor.knowledge_base().index.len();
    let sentences = "পাট বীজ বপনের আগে জমি ভালোভাবে চাষ করতে হয়। পাটের আঁশ ছাড়াতে পরিষ্কার পানিতে জাক দিতে হয়। ".repeat(8);
    let manifest = serde_json::json!([{
        "doc_id": "jute-basics",
        "title": "পাট চাষ",
        "source_kind": "bulletin",
        "raw_text": format!("# পাট চাষ\n{sentences}")
    }]);
    let r = call(&state, "POST", "/ingest", Some(manifest.to_string())).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.body);
    let v = r.json();
    assert_eq!(v["documents"], 1);
    assert_eq!(v["index_size"], before + v["chunks"].as_u64().unwrap() as usize);
    assert!(dir.path().join("corpus/jute-basics-0000.md").is_file());

    let q = call(&state, "POST", "/query", Some(r#"{"question": "পাটের আঁশ ছাড়াতে কী করতে হয়?"}"#.into())).await;
    let resp: QueryResponse = serde_json::from_str(&q.body).unwrap();
    assert_eq!(resp.evidence[0].chunk_id, "jute-basics-0000");

    // Re-ingesting the same document replaces it.
    let again = call(&state, "POST", "/ingest", Some(manifest.to_string())).await;
    assert_eq!(again.json()["index_size"], v["index_size"]);
}

#[tokio::test]
async fn metrics_count_queries_and_latency() {
    let dir = tempfile::tempdir().unwrap();
    let state = fixture_state(dir.path());
    for _ in 0..2 {
        call(&state, "POST", "/query", Some(golden_request("query_request.json"))).await;
    }
    let m = call(&state, "GET", "/metrics", None).await;
    assert_eq!(m.status, StatusCode::OK);
    assert!(m.body.contains("queries_total 2"), "{}", m.body);
    assert!(m.body.contains("retrieval_latency_seconds_count 2"));
    assert!(m.body.contains("grounding_flags_total 0"));
}

#[tokio::test]
async fn unreachable_backend_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = fixture_config(dir.path());
    ingest_fixture_corpus(&cfg);
    cfg.backend.kind = BackendKind::Http;
    cfg.backend.endpoint = "http://127.0.0.1:9/v1/chat/completions".into();
    cfg.backend.timeout_ms = 2000;
    let state = Arc::new(AppState::build(cfg).unwrap());

    let h = call(&state, "GET", "/health", None).await;
    assert_eq!(h.status, StatusCode::SERVICE_UNAVAILABLE);
    let h: Health = serde_json::from_str(&h.body).unwrap();
    assert_eq!((h.index.as_str(), h.backend.as_str(), h.provider.as_str()), ("ok", "unavailable", "ok"));

    let q = call(&state, "POST", "/query", Some(golden_request("query_request.json"))).await;
    assert_eq!(q.status, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(q.json()["error"], "backend_unavailable");

    let v = call(&state, "POST", "/voice/turn", Some(golden_request("voice_turn_request.json"))).await;
    assert_eq!(v.status, StatusCode::OK);
    let v = v.json();
    assert_eq!(v["reply"], advisor_core::dialogue::APOLOGY);
    assert_eq!(v["state"], "open");
}

#[test]
fn startup_without_corpus_names_the_index() {
    let dir = tempfile::tempdir().unwrap();
    let err = AppState::build(fixture_config(dir.path())).err().unwrap();
    assert_eq!(err.component, "index");
    assert!(!err.to_string().contains('\n'));
}
