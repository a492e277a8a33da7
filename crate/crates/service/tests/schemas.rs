mod common;

use std::path::Path;

use axum::http::StatusCode;
use common::*;
use serde_json::Value;

fn schema(name: &str) -> jsonschema::Validator {
    let path = repo().join("schemas").join(format!("{name}.schema.json"));
    let raw: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    jsonschema::validator_for(&raw).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn check(name: &str, value: &Value) {
    let v = schema(name);
    let errors: Vec<String> = v.iter_errors(value).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{name}: {errors:?}");
}

fn file(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn jsonl(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn fixture_files_match_their_schemas() {
    let f = fixtures();
    check("query_request", &file(&f.join("golden/query_request.json")));
    check("query_response", &file(&f.join("golden/query_response.json")));
    check("voice_turn_request", &file(&f.join("golden/voice_turn_request.json")));
    check("voice_turn_response", &file(&f.join("golden/voice_turn_response.json")));
    check("chat_request", &file(&repo().join("crates/core/tests/golden/chat_request_two_blocks.json")));
    check("manifest", &file(&f.join("corpus/manifest.json")));
    check("lexicon", &file(&f.join("corpus/lexicon.json")));
    check("rules", &file(&f.join("corpus/rules.json")));
    check("published_reference", &file(&f.join("eval/published_reference.json")));
    for name in ["candidate", "baseline"] {
        for record in jsonl(&f.join(format!("eval/{name}.jsonl"))) {
            check("eval_record", &record);
        }
    }
    for record in jsonl(&f.join("eval/coverage.jsonl")) {
        check("coverage_record", &record);
    }
}

#[test]
fn schemas_reject_malformed_bodies() {
    let v = schema("query_request");
    assert!(!v.is_valid(&serde_json::json!({"question": ""})));
    assert!(!v.is_valid(&serde_json::json!({"question": "ধান", "extra": 1})));
    let m = schema("manifest");
    let both = serde_json::json!([{"doc_id": "a", "title": "t", "source_kind": "manual", "raw_text": "x", "raw_text_file": "y"}]);
    assert!(!m.is_valid(&both));
    check("chat_response", &serde_json::json!({"choices": [{"message": {"role": "assistant", "content": "ok"}}]}));
}

#[tokio::test]
async fn live_responses_match_their_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let state = fixture_state(dir.path());

    check("health", &call(&state, "GET", "/health", None).await.json());

    let turn = std::fs::read_to_string(fixtures().join("golden/voice_turn_request.json")).unwrap();
    let r = call(&state, "POST", "/voice/turn", Some(turn)).await;
    check("voice_turn_response", &r.json());
    check("voice_session", &call(&state, "GET", "/voice/session/golden-voice-1", None).await.json());

    let manifest = r#"[{"doc_id": "jute", "title": "পাট", "source_kind": "bulletin", "raw_text": "পাটের বীজ চৈত্র মাসে বপন করুন।"}]"#;
    let r = call(&state, "POST", "/ingest", Some(manifest.into())).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.body);
    check("ingest_response", &r.json());

    let r = call(&state, "POST", "/ingest", Some("[{\"doc_id\": 1,\n".into())).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    check("error", &r.json());
    let r = call(&state, "GET", "/voice/session/missing", None).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    check("error", &r.json());
}
