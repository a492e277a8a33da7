//! Composition root: builds the advisor, gateway and metrics from config.

use std::sync::Arc;

use advisor_core::corpus;
use advisor_core::dialogue::{DialogueGateway, SessionStore, SystemClock, TermLexicon};
use advisor_core::embedding::EmbeddingProvider;
use advisor_core::generation::{ChatBackend, Generator, HttpChatBackend, StubBackend};
use advisor_core::index::{VectorIndex, META_FILE};
use advisor_core::{Advisor, KnowledgeBase};
use thiserror::Error;

use crate::config::{BackendKind, ServiceConfig};
use crate::metrics::Metrics;
use crate::pipeline;

/// A fatal startup problem, attributed to one component.
#[derive(Debug, Error)]
#[error("startup failed: {component}: {message}")]
pub struct StartupError {
    pub component: &'static str,
    pub message: String,
}

fn fail(component: &'static str, message: impl ToString) -> StartupError {
    StartupError {
        component,
        message: message.to_string(),
    }
}

pub struct AppState {
    pub config: ServiceConfig,
    pub advisor: Arc<Advisor>,
    pub gateway: Arc<DialogueGateway>,
    pub provider: Arc<dyn EmbeddingProvider>,
    pub backend: Arc<dyn ChatBackend>,
    pub metrics: Metrics,
    /// Held for the whole of an ingest so rebuilds never overlap.
    pub ingest_lock: tokio::sync::Mutex<()>,
}

pub fn make_provider(cfg: &ServiceConfig) -> Arc<dyn EmbeddingProvider> {
    Arc::from(cfg.embedding.provider.build(cfg.embedding.dims, cfg.embedding_timeout()))
}

pub fn make_backend(cfg: &ServiceConfig) -> Arc<dyn ChatBackend> {
    match cfg.backend.kind {
        BackendKind::Stub => Arc::new(StubBackend::new(cfg.backend.stub_seed)),
        BackendKind::Http => Arc::new(HttpChatBackend::new(
            &cfg.backend.endpoint,
            &cfg.backend.model,
            cfg.backend_timeout(),
        )),
    }
}

pub fn make_generator(cfg: &ServiceConfig, backend: Arc<dyn ChatBackend>) -> Generator {
    Generator {
        limits: cfg.prompt,
        sampling: cfg.sampling,
        grounding: cfg.grounding,
        ..Generator::new(backend)
    }
}

/// Load the persisted index, or build one from the chunk files in the
/// corpus directory when none has been saved yet.
pub fn load_or_build_index(cfg: &ServiceConfig, provider: &dyn EmbeddingProvider) -> Result<VectorIndex, StartupError> {
    let mut index = if cfg.index_dir.join(META_FILE).is_file() {
        VectorIndex::load(&cfg.index_dir).map_err(|e| fail("index", e))?
    } else if pipeline::has_chunks(&cfg.corpus_dir) {
        let chunks = corpus::read_chunk_dir(&cfg.corpus_dir).map_err(|e| fail("corpus", e))?;
        let index = pipeline::build_index(
            &chunks,
            provider,
            cfg.index.build,
            cfg.index.query,
            cfg.embedding.batch_size,
        )
        .map_err(|e| fail("index", e))?;
        index.save(&cfg.index_dir).map_err(|e| fail("index", e))?;
        index
    } else {
        return Err(fail(
            "index",
            format!(
                "no index in {} and no chunk files in {}",
                cfg.index_dir.display(),
                cfg.corpus_dir.display()
            ),
        ));
    };
    if index.provider() != provider.name() || index.dims() != provider.dims() {
        return Err(fail(
            "index",
            format!(
                "built with provider {} ({} dims) but {} ({} dims) is configured",
                index.provider(),
                index.dims(),
                provider.name(),
                provider.dims()
            ),
        ));
    }
    index.set_query_params(cfg.index.query);
    Ok(index)
}

impl AppState {
    pub fn build(config: ServiceConfig) -> Result<Self, StartupError> {
        config.validate().map_err(|e| fail("config", e))?;
        let provider = make_provider(&config);
        let backend = make_backend(&config);
        let index = load_or_build_index(&config, provider.as_ref())?;
        let lexicon = match &config.gateway.lexicon {
            Some(p) => TermLexicon::load(p).map_err(|e| fail("lexicon", e))?,
            None => TermLexicon::default(),
        };
        let advisor = Arc::new(Advisor::new(
            KnowledgeBase::new(index),
            provider.clone(),
            make_generator(&config, backend.clone()),
            config.retrieval,
        ));
        let idle = chrono::Duration::seconds(config.gateway.idle_timeout_secs as i64);
        let store = SessionStore::new(idle, Arc::new(SystemClock));
        let gateway = Arc::new(
            DialogueGateway::new(advisor.clone(), store, lexicon).with_max_norm_dist(config.gateway.max_norm_dist),
        );
        Ok(Self {
            config,
            advisor,
            gateway,
            provider,
            backend,
            metrics: Metrics::new(),
            ingest_lock: tokio::sync::Mutex::new(()),
        })
    }
}
