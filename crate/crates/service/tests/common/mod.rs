#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use advisor_core::corpus;
use advisor_service::config::TimingMode;
use advisor_service::{pipeline, AppState, ServiceConfig};
use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use tower::ServiceExt;

pub fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

pub fn fixtures() -> PathBuf {
    repo().join("fixtures")
}

/// Compare `actual` with a golden file; `BLESS_GOLDEN=1` rewrites it.
pub fn check_golden(name: &str, actual: &str) {
    let path = fixtures().join("golden").join(name);
    if std::env::var_os("BLESS_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("{}: {e} (run with BLESS_GOLDEN=1 to create)", path.display()));
    assert_eq!(actual, expected, "golden {name} differs");
}

/// Config for a service rooted in `dir`, on the fixture lexicon and rules,
/// with the stub backend and timings off.
pub fn fixture_config(dir: &Path) -> ServiceConfig {
    let mut cfg = ServiceConfig::default();
    cfg.corpus_dir = dir.join("corpus");
    cfg.index_dir = dir.join("index");
    cfg.ingest.rules = Some(fixtures().join("corpus/rules.json"));
    cfg.gateway.lexicon = Some(fixtures().join("corpus/lexicon.json"));
    cfg.server.timing = TimingMode::Off;
    cfg
}

/// Ingest the fixture manifest into `cfg.corpus_dir`.
pub fn ingest_fixture_corpus(cfg: &ServiceConfig) {
    let docs = corpus::load_manifest(&fixtures().join("corpus/manifest.json")).unwrap();
    let rules = corpus::load_rules(cfg.ingest.rules.as_ref().unwrap()).unwrap();
    let (chunks, _) = pipeline::ingest(&docs, &rules, &cfg.chunking).unwrap();
    corpus::write_chunk_dir(&cfg.corpus_dir, &chunks).unwrap();
}

pub fn fixture_state(dir: &Path) -> Arc<AppState> {
    let cfg = fixture_config(dir);
    ingest_fixture_corpus(&cfg);
    Arc::new(AppState::build(cfg).unwrap())
}

pub struct Reply {
    pub status: StatusCode,
    pub body: String,
}

impl Reply {
    pub fn json(&self) -> serde_json::Value {
        serde_json::from_str(&self.body).unwrap_or_else(|e| panic!("{e}: {}", self.body))
    }
}

pub async fn call(state: &Arc<AppState>, method: &str, uri: &str, body: Option<String>) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    if body.is_some() {
        req = req.header("content-type", "application/json");
    }
    let req = req.body(body.map(Body::from).unwrap_or_else(Body::empty)).unwrap();
    let resp = advisor_service::api::router(state.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    Reply {
        status,
        body: String::from_utf8(bytes.to_vec()).unwrap(),
    }
}
