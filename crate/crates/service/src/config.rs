//! Service configuration: one TOML file, overridable from the environment.

use std::path::{Path, PathBuf};
use std::time::Duration;

use advisor_core::corpus::ChunkingConfig;
use advisor_core::embedding::{ProviderSpec, DEFAULT_DIMS};
use advisor_core::generation::{GroundingConfig, PromptLimits, SamplingConfig};
use advisor_core::index::{HnswParams, QueryParams};
use advisor_core::RetrievalConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Prefix of environment overrides. `ADVISOR__SERVER__PORT=9000` sets
/// `server.port`.
pub const ENV_PREFIX: &str = "ADVISOR__";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid override {key}: {reason}")]
    Override { key: String, reason: String },
    #[error("invalid config value {key}: {reason}")]
    Invalid { key: &'static str, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    /// Chunk files (Markdown, one per chunk) live here.
    pub corpus_dir: PathBuf,
    pub index_dir: PathBuf,
    pub ingest: IngestSection,
    pub chunking: ChunkingConfig,
    pub embedding: EmbeddingSection,
    pub index: IndexSection,
    pub backend: BackendSection,
    pub retrieval: RetrievalConfig,
    pub sampling: SamplingConfig,
    pub prompt: PromptLimits,
    pub grounding: GroundingConfig,
    pub gateway: GatewaySection,
    pub server: ServerSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestSection {
    /// OCR correction rules applied by `/ingest`.
    pub rules: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingSection {
    pub provider: ProviderSpec,
    pub dims: usize,
    pub timeout_ms: u64,
    pub batch_size: usize,
}

impl Default for EmbeddingSection {
    fn default() -> Self {
        Self {
            provider: ProviderSpec::Fallback,
            dims: DEFAULT_DIMS,
            timeout_ms: 10_000,
            batch_size: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IndexSection {
    pub build: HnswParams,
    pub query: QueryParams,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    /// Deterministic in-process backend for offline runs and tests.
    #[default]
    Stub,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSection {
    pub kind: BackendKind,
    pub endpoint: String,
    pub model: String,
    pub timeout_ms: u64,
    /// Seed the stub uses when `sampling.seed` is unset.
    pub stub_seed: u64,
}

impl Default for BackendSection {
    fn default() -> Self {
        Self {
            kind: BackendKind::Stub,
            endpoint: "http://127.0.0.1:8000/v1/chat/completions".into(),
            model: "stub-echo".into(),
            timeout_ms: 30_000,
            stub_seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewaySection {
    pub lexicon: Option<PathBuf>,
    pub idle_timeout_secs: u64,
    pub sweep_interval_secs: u64,
    pub max_norm_dist: f64,
    /// Upper bound on one voice turn, backend call included.
    pub turn_timeout_ms: u64,
}

impl Default for GatewaySection {
    fn default() -> Self {
        Self {
            lexicon: None,
            idle_timeout_secs: 15 * 60,
            sweep_interval_secs: 60,
            max_norm_dist: advisor_core::dialogue::DEFAULT_MAX_NORM_DIST,
            turn_timeout_ms: 45_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimingMode {
    #[default]
    Wall,
    /// Report zero timings so responses are byte-reproducible.
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerSection {
    pub bind: String,
    pub port: u16,
    pub timing: TimingMode,
}

impl Default for ServerSection {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1".into(),
            port: 8080,
            timing: TimingMode::Wall,
        }
    }
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            corpus_dir: "data/corpus".into(),
            index_dir: "data/index".into(),
            ingest: IngestSection::default(),
            chunking: ChunkingConfig::default(),
            embedding: EmbeddingSection::default(),
            index: IndexSection::default(),
            backend: BackendSection::default(),
            retrieval: RetrievalConfig::default(),
            sampling: SamplingConfig::default(),
            prompt: PromptLimits::default(),
            grounding: GroundingConfig::default(),
            gateway: GatewaySection::default(),
            server: ServerSection::default(),
        }
    }
}

/// Set `path` (already split on dots) in `table` to `raw`, read as a TOML
/// literal when it parses as one and as a bare string otherwise.
fn set_dotted(table: &mut toml::Table, path: &[String], raw: &str) -> Result<(), String> {
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_owned()));
    let (last, parents) = path.split_last().ok_or("empty key")?;
    let mut cur = table;
    for p in parents {
        cur = cur
            .entry(p.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| format!("{p} is not a section"))?;
    }
    cur.insert(last.clone(), value);
    Ok(())
}

impl ServiceConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        toml::from_str(s).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Read `path` (or start from defaults), apply environment overrides,
    /// then resolve relative paths against the config file's directory.
    pub fn load(
        path: Option<&Path>,
        env: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, ConfigError> {
        let mut table = match path {
            Some(p) => {
                let raw = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                    path: p.to_path_buf(),
                    source,
                })?;
                toml::from_str::<toml::Table>(&raw).map_err(|e| ConfigError::Parse(e.to_string()))?
            }
            None => toml::Table::new(),
        };
        for (k, v) in env {
            let Some(rest) = k.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let dotted: Vec<String> = rest.split("__").map(str::to_lowercase).collect();
            set_dotted(&mut table, &dotted, &v).map_err(|reason| ConfigError::Override {
                key: k.clone(),
                reason,
            })?;
        }
        let mut cfg: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        if let Some(base) = path.and_then(Path::parent) {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus_dir);
        fix(&mut self.index_dir);
        if let Some(p) = self.ingest.rules.as_mut() {
            fix(p);
        }
        if let Some(p) = self.gateway.lexicon.as_mut() {
            fix(p);
        }
    }

    /// Check values and make sure every referenced path exists or can be
    /// created.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key, reason: String| ConfigError::Invalid { key, reason };
        self.chunking.validate().map_err(|e| bad("chunking", e.to_string()))?;
        self.retrieval.validate().map_err(|e| bad("retrieval", e.to_string()))?;
        self.sampling.validate().map_err(|e| bad("sampling", e.to_string()))?;
        if self.embedding.dims == 0 || self.embedding.batch_size == 0 {
            return Err(bad("embedding", "dims and batch_size must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.gateway.max_norm_dist) {
            return Err(bad("gateway.max_norm_dist", "must lie in [0, 1]".into()));
        }
        if self.backend.kind == BackendKind::Http && self.backend.endpoint.trim().is_empty() {
            return Err(bad("backend.endpoint", "required for the http backend".into()));
        }
        for (key, dir) in [("corpus_dir", &self.corpus_dir), ("index_dir", &self.index_dir)] {
            std::fs::create_dir_all(dir).map_err(|e| bad(key, format!("{}: {e}", dir.display())))?;
        }
        for (key, file) in [("ingest.rules", &self.ingest.rules), ("gateway.lexicon", &self.gateway.lexicon)] {
            if let Some(f) = file {
                if !f.is_file() {
                    return Err(bad(key, format!("{} does not exist", f.display())));
                }
            }
        }
        Ok(())
    }

    pub fn embedding_timeout(&self) -> Duration {
        Duration::from_millis(self.embedding.timeout_ms)
    }

    pub fn backend_timeout(&self) -> Duration {
        Duration::from_millis(self.backend.timeout_ms)
    }
}
