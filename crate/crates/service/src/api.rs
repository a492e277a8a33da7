//! REST API.

use std::collections::HashSet;
use std::sync::Arc;
use std::time::{Duration, Instant};

use advisor_core::corpus::{self, CorpusError};
use advisor_core::dialogue::{DialogueError, DialogueSession, TurnOutcome};
use advisor_core::generation::{GenerationError, HistoryTurn, SentenceSupport};
use advisor_core::retrieval::RetrievalError;
use advisor_core::KnowledgeBase;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::config::TimingMode;
use crate::pipeline::{self, IngestSummary, PipelineError};
use crate::state::AppState;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/query", post(query))
        .route("/voice/turn", post(voice_turn))
        .route("/voice/session/{id}", get(get_session).delete(delete_session))
        .route("/ingest", post(ingest))
        .route("/health", get(health))
        .route("/metrics", get(metrics))
        .with_state(state)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ApiError {
    pub error: String,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub line: Option<usize>,
}

/// An error response: status plus JSON body.
#[derive(Debug)]
pub struct Failure(pub StatusCode, pub ApiError);

impl Failure {
    fn new(status: StatusCode, error: &str, detail: impl ToString) -> Self {
        Self(status, ApiError { error: error.into(), detail: detail.to_string(), line: None })
    }
}

impl IntoResponse for Failure {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

impl From<RetrievalError> for Failure {
    fn from(e: RetrievalError) -> Self {
        match e {
            RetrievalError::EmptyQuery => Self::new(StatusCode::BAD_REQUEST, "empty_query", e),
            RetrievalError::EmptyIndex => Self::new(StatusCode::SERVICE_UNAVAILABLE, "empty_index", e),
            RetrievalError::Provider(_) => Self::new(StatusCode::BAD_GATEWAY, "provider_unavailable", e),
            _ => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "retrieval_failed", e),
        }
    }
}

impl From<GenerationError> for Failure {
    fn from(e: GenerationError) -> Self {
        let (status, kind) = match &e {
            GenerationError::BackendUnavailable { .. } => (StatusCode::SERVICE_UNAVAILABLE, "backend_unavailable"),
            GenerationError::TimeoutExceeded => (StatusCode::GATEWAY_TIMEOUT, "backend_timeout"),
            GenerationError::BackendRefusal { .. } | GenerationError::EmptyAnswer => {
                (StatusCode::BAD_GATEWAY, "backend_refused")
            }
            GenerationError::ContextBudgetExhausted { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "context_budget"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "generation_failed"),
        };
        Self::new(status, kind, e)
    }
}

fn join_error(e: tokio::task::JoinError) -> Failure {
    Failure::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryRequest {
    pub question: String,
    #[serde(default)]
    pub history: Vec<HistoryTurn>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub rank: usize,
    pub chunk_id: String,
    pub topic: String,
    pub text: String,
    pub semantic: f64,
    pub lexical: f64,
    pub metadata_boost: f64,
    pub fused: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grounding {
    pub sentences: Vec<SentenceSupport>,
    pub flagged: usize,
    pub disclaimer_added: bool,
    pub coherent: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct QueryTimings {
    pub embed_ms: f64,
    pub search_ms: f64,
    pub rerank_ms: f64,
    pub generate_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResponse {
    pub question: String,
    pub answer: String,
    pub citations: Vec<String>,
    pub grounding: Grounding,
    pub voice_ready_text: String,
    pub evidence: Vec<Evidence>,
    pub model: String,
    pub timings: QueryTimings,
}

/// Retrieve and answer `req` on the calling thread.
pub fn answer_query(state: &AppState, req: &QueryRequest) -> Result<QueryResponse, Failure> {
    let started = Instant::now();
    let retrieval = state.advisor.retrieve(&req.question)?;
    state.metrics.retrieval_latency.observe(started.elapsed().as_secs_f64());
    let t = retrieval.timings;
    let gen_started = Instant::now();
    let answer = state
        .advisor
        .answer_from(&req.question, retrieval, &req.history)
        .map_err(|e| match e {
            advisor_core::engine::AdvisorError::Retrieval(e) => Failure::from(e),
            advisor_core::engine::AdvisorError::Generation(e) => Failure::from(e),
        })?;
    let generate_ms = gen_started.elapsed().as_secs_f64() * 1e3;
    let g = answer.generation;
    let flagged = g.grounding.iter().filter(|s| s.flagged).count();
    state.metrics.queries_total.inc();
    state.metrics.grounding_flags_total.inc_by(flagged as u64);
    let timings = match state.config.server.timing {
        TimingMode::Wall => QueryTimings {
            embed_ms: t.embed_ms,
            search_ms: t.search_ms,
            rerank_ms: t.rerank_ms,
            generate_ms,
        },
        TimingMode::Off => QueryTimings::default(),
    };
    Ok(QueryResponse {
        question: req.question.clone(),
        answer: g.answer_text,
        citations: g.citations,
        grounding: Grounding {
            sentences: g.grounding,
            flagged,
            disclaimer_added: g.disclaimer_added,
            coherent: g.coherent,
        },
        voice_ready_text: g.voice_ready_text,
        evidence: answer
            .retrieval
            .items
            .into_iter()
            .enumerate()
            .map(|(i, it)| Evidence {
                rank: i + 1,
                chunk_id: it.chunk_id,
                topic: it.topic,
                text: it.text,
                semantic: it.semantic,
                lexical: it.lexical,
                metadata_boost: it.metadata_boost,
                fused: it.fused,
            })
            .collect(),
        model: state.backend.model().to_owned(),
        timings,
    })
}

async fn query(State(state): State<Arc<AppState>>, Json(req): Json<QueryRequest>) -> Result<Json<QueryResponse>, Failure> {
    let resp = tokio::task::spawn_blocking(move || answer_query(&state, &req))
        .await
        .map_err(join_error)??;
    Ok(Json(resp))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoiceTurnRequest {
    pub session_id: String,
    pub transcript: String,
    /// Accepted for platform compatibility; replies are always Bengali.
    #[serde(default)]
    pub locale: Option<String>,
}

async fn voice_turn(
    State(state): State<Arc<AppState>>,
    Json(req): Json<VoiceTurnRequest>,
) -> Result<Json<TurnOutcome>, Failure> {
    if req.session_id.trim().is_empty() {
        return Err(Failure::new(StatusCode::BAD_REQUEST, "empty_session_id", "session_id is required"));
    }
    let budget = Duration::from_millis(state.config.gateway.turn_timeout_ms);
    let worker = state.clone();
    let task = tokio::task::spawn_blocking(move || worker.gateway.handle_turn(&req.session_id, &req.transcript));
    let outcome = tokio::time::timeout(budget, task)
        .await
        .map_err(|_| Failure::new(StatusCode::GATEWAY_TIMEOUT, "turn_timeout", "voice turn exceeded its time budget"))?
        .map_err(join_error)?
        .map_err(|e| match e {
            DialogueError::EmptyTranscript => Failure::new(StatusCode::BAD_REQUEST, "empty_transcript", e),
            other => Failure::new(StatusCode::INTERNAL_SERVER_ERROR, "dialogue_failed", other),
        })?;
    if !outcome.clarification && !outcome.upstream_error {
        state.metrics.queries_total.inc();
    }
    Ok(Json(outcome))
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<DialogueSession>, Failure> {
    state
        .gateway
        .store()
        .snapshot(&id)
        .map(Json)
        .ok_or_else(|| Failure::new(StatusCode::NOT_FOUND, "session_not_found", format!("no session {id:?}")))
}

async fn delete_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<StatusCode, Failure> {
    if state.gateway.store().delete(&id) {
        Ok(StatusCode::NO_CONTENT)
    } else {
        Err(Failure::new(StatusCode::NOT_FOUND, "session_not_found", format!("no session {id:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestResponse {
    pub documents: usize,
    pub chunks: usize,
    pub corrections: usize,
    pub index_size: usize,
}

fn corpus_failure(e: CorpusError) -> Failure {
    match e {
        CorpusError::Parse { line, ref message } => Failure(
            StatusCode::BAD_REQUEST,
            ApiError { error: "parse_error".into(), detail: message.clone(), line: Some(line) },
        ),
        CorpusError::InvalidDocument(_) | CorpusError::EmptyDocument(_) | CorpusError::InvalidConfig(_) => {
            Failure::new(StatusCode::BAD_REQUEST, "invalid_document", e)
        }
        other => Failure::new(StatusCode::INTERNAL_SERVER_ERROR, "ingest_failed", other),
    }
}

/// Body: a manifest JSON array. File references resolve against the
/// corpus directory. Documents already in the corpus are replaced.
async fn ingest(State(state): State<Arc<AppState>>, body: String) -> Result<Json<IngestResponse>, Failure> {
    let _writer = state.ingest_lock.lock().await;
    let worker = state.clone();
    let summary = tokio::task::spawn_blocking(move || run_ingest(&worker, &body))
        .await
        .map_err(join_error)??;
    Ok(Json(summary))
}

fn run_ingest(state: &AppState, body: &str) -> Result<IngestResponse, Failure> {
    let cfg = &state.config;
    let docs = corpus::parse_manifest(body, &cfg.corpus_dir).map_err(corpus_failure)?;
    let rules = match &cfg.ingest.rules {
        Some(p) => corpus::load_rules(p).map_err(corpus_failure)?,
        None => Vec::new(),
    };
    let pipeline_failure = |e: PipelineError| match e {
        PipelineError::Corpus(e) => corpus_failure(e),
        PipelineError::Embedding(e) => Failure::new(StatusCode::BAD_GATEWAY, "provider_unavailable", e),
        PipelineError::Index(e) => Failure::new(StatusCode::INTERNAL_SERVER_ERROR, "index_failed", e),
    };
    let (incoming, IngestSummary { documents, chunks, corrections }) =
        pipeline::ingest(&docs, &rules, &cfg.chunking).map_err(pipeline_failure)?;
    let doc_ids: HashSet<String> = docs.iter().map(|d| d.doc_id.clone()).collect();

    let current = state.advisor.knowledge_base();
    let merged = pipeline::merge_chunks(current.index.chunks(), incoming);
    let index = pipeline::build_index(
        &merged,
        state.provider.as_ref(),
        cfg.index.build,
        cfg.index.query,
        cfg.embedding.batch_size,
    )
    .map_err(pipeline_failure)?;
    pipeline::write_documents(&cfg.corpus_dir, &doc_ids, &merged).map_err(corpus_failure)?;
    index
        .save(&cfg.index_dir)
        .map_err(|e| Failure::new(StatusCode::INTERNAL_SERVER_ERROR, "index_failed", e))?;
    let index_size = index.len();
    state.advisor.swap(KnowledgeBase::new(index));
    tracing::info!(documents, chunks, corrections, index_size, "ingest complete");
    Ok(IngestResponse { documents, chunks, corrections, index_size })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub index: String,
    pub backend: String,
    pub provider: String,
}

impl Health {
    pub fn is_ok(&self) -> bool {
        [&self.index, &self.backend, &self.provider].iter().all(|s| *s == "ok")
    }
}

pub fn check_health(state: &AppState) -> Health {
    let status = |r: Result<(), String>| match r {
        Ok(()) => "ok".to_owned(),
        Err(e) => {
            tracing::warn!(error = %e, "health probe failed");
            "unavailable".to_owned()
        }
    };
    let index = if state.advisor.knowledge_base().index.is_empty() { "empty".to_owned() } else { "ok".to_owned() };
    Health {
        index,
        backend: status(state.backend.health().map_err(|e| e.to_string())),
        provider: status(state.provider.health().map_err(|e| e.to_string())),
    }
}

async fn health(State(state): State<Arc<AppState>>) -> Result<(StatusCode, Json<Health>), Failure> {
    let h = tokio::task::spawn_blocking(move || check_health(&state)).await.map_err(join_error)?;
    let code = if h.is_ok() { StatusCode::OK } else { StatusCode::SERVICE_UNAVAILABLE };
    Ok((code, Json(h)))
}

async fn metrics(State(state): State<Arc<AppState>>) -> impl IntoResponse {
    ([(header::CONTENT_TYPE, "text/plain; version=0.0.4")], state.metrics.render())
}

/// Close idle sessions every `every` until the runtime shuts down.
pub fn spawn_sweeper(state: Arc<AppState>, every: Duration) -> tokio::task::JoinHandle<()> {
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(every.max(Duration::from_secs(1)));
        loop {
            tick.tick().await;
            let closed = state.gateway.store().sweep();
            if closed > 0 {
                tracing::info!(closed, "expired sessions swept");
            }
        }
    })
}
