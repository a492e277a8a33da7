//! Unit-norm embeddings and the providers that produce them.

use std::fmt;
use std::hash::Hasher;
use std::str::FromStr;
use std::time::Duration;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net;

pub const DEFAULT_DIMS: usize = 384;
const NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbeddingError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty input text")]
    EmptyInput,
    #[error("embedding provider unavailable: {reason}")]
    ProviderUnavailable {
        reason: String,
        retry_after: Option<Duration>,
    },
    #[error("invalid vector: {0}")]
    InvalidVector(String),
}

/// A finite, L2-normalized vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f32>,
}

impl EmbeddingVector {
    /// Normalize arbitrary finite values to unit length.
    pub fn normalize(values: Vec<f64>) -> Result<Self, EmbeddingError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::InvalidVector("non-finite component".into()));
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(EmbeddingError::InvalidVector("zero vector".into()));
        }
        Ok(Self {
            values: values.iter().map(|v| (v / norm) as f32).collect(),
        })
    }

    /// Accept values that are already unit-norm, bit for bit.
    pub fn from_unit(values: Vec<f32>) -> Result<Self, EmbeddingError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::InvalidVector("non-finite component".into()));
        }
        let norm = values.iter().map(|&v| f64::from(v).powi(2)).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(EmbeddingError::InvalidVector(format!("norm {norm} is not 1")));
        }
        Ok(Self { values })
    }

    pub fn dims(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|&v| f64::from(v).powi(2)).sum::<f64>().sqrt()
    }
}

/// Dot product accumulated in f64; equals cosine for unit-norm inputs.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbeddingError> {
    if a.dims() != b.dims() {
        return Err(EmbeddingError::DimensionMismatch {
            expected: a.dims(),
            got: b.dims(),
        });
    }
    Ok(dot(a.as_slice(), b.as_slice()).clamp(-1.0, 1.0))
}

pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum()
}

/// Produces embeddings for text. Implementations must be deterministic:
/// the same text always yields the same vector.
pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> &str;
    fn dims(&self) -> usize;
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError>;

    /// Cheap readiness probe.
    fn health(&self) -> Result<(), EmbeddingError> {
        Ok(())
    }
}

/// Embed a single text, rejecting blank input.
pub fn embed(provider: &dyn EmbeddingProvider, text: &str) -> Result<EmbeddingVector, EmbeddingError> {
    if text.trim().is_empty() {
        return Err(EmbeddingError::EmptyInput);
    }
    let mut out = provider.embed_batch(&[text])?;
    out.pop().ok_or_else(|| EmbeddingError::InvalidVector("provider returned nothing".into()))
}

/// Model-free embedder: character 3- to 5-grams of each lowercased word
/// (padded with `<` and `>`), feature-hashed with FNV-1a into `dims` signed
/// buckets, term-frequency weighted, L2-normalized.
///
/// Grams never cross word boundaries, so word order does not matter but
/// substituting a word does.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dims: usize,
}

impl HashingEmbedder {
    pub const MIN_N: usize = 3;
    pub const MAX_N: usize = 5;

    pub fn new(dims: usize) -> Self {
        assert!(dims > 0, "dims must be positive");
        Self { dims }
    }

    fn embed_one(&self, text: &str) -> Result<EmbeddingVector, EmbeddingError> {
        let mut acc = vec![0.0f64; self.dims];
        let mut features = 0usize;
        let mut gram = String::new();
        for word in crate::text::normalized_tokens(text) {
            let padded: Vec<char> = std::iter::once('<')
                .chain(word.chars())
                .chain(std::iter::once('>'))
                .collect();
            for n in Self::MIN_N..=Self::MAX_N {
                for window in padded.windows(n) {
                    gram.clear();
                    gram.extend(window);
                    let mut h = FnvHasher::default();
                    h.write(gram.as_bytes());
                    let h = h.finish();
                    let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
                    acc[(h % self.dims as u64) as usize] += sign;
                    features += 1;
                }
            }
        }
        if features == 0 {
            return Err(EmbeddingError::EmptyInput);
        }
        EmbeddingVector::normalize(acc)
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_DIMS)
    }
}

impl EmbeddingProvider for HashingEmbedder {
    fn name(&self) -> &str {
        "fallback"
    }

    fn dims(&self) -> usize {
        self.dims
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        texts.iter().map(|t| self.embed_one(t)).collect()
    }
}

#[derive(Serialize)]
struct RemoteRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct RemoteResponse {
    vectors: Vec<Vec<f64>>,
}

/// Client for an embedding server speaking
/// `POST {texts: [string]} -> {vectors: [[float]]}`.
pub struct RemoteEmbedder {
    url: String,
    dims: usize,
    agent: ureq::Agent,
}

impl RemoteEmbedder {
    pub fn new(url: impl Into<String>, dims: usize, timeout: Duration) -> Self {
        Self {
            url: url.into(),
            dims,
            agent: net::agent(timeout),
        }
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn name(&self) -> &str {
        "remote"
    }

    fn dims(&self) -> usize {
        self.dims
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        let unavailable = |reason: String, retry_after| EmbeddingError::ProviderUnavailable {
            reason,
            retry_after,
        };
        let resp = net::post_json(&self.agent, &self.url, &RemoteRequest { texts }).map_err(|e| {
            match e {
                net::NetError::Timeout => unavailable("timed out".into(), None),
                net::NetError::Unreachable(m) => unavailable(m, None),
            }
        })?;
        if resp.status != 200 {
            return Err(unavailable(format!("http status {}", resp.status), resp.retry_after));
        }
        let parsed: RemoteResponse = serde_json::from_str(&resp.body)
            .map_err(|e| EmbeddingError::InvalidVector(format!("bad response body: {e}")))?;
        if parsed.vectors.len() != texts.len() {
            return Err(EmbeddingError::InvalidVector(format!(
                "asked for {} vectors, got {}",
                texts.len(),
                parsed.vectors.len()
            )));
        }
        parsed
            .vectors
            .into_iter()
            .map(|v| {
                if v.len() != self.dims {
                    return Err(EmbeddingError::DimensionMismatch {
                        expected: self.dims,
                        got: v.len(),
                    });
                }
                EmbeddingVector::normalize(v)
            })
            .collect()
    }

    fn health(&self) -> Result<(), EmbeddingError> {
        self.embed_batch(&["ping"]).map(|_| ())
    }
}

/// Provider selection as written in configuration:
/// `fallback` or `remote(<url>)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum ProviderSpec {
    #[default]
    Fallback,
    Remote(String),
}

impl FromStr for ProviderSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "fallback" {
            return Ok(Self::Fallback);
        }
        s.strip_prefix("remote(")
            .and_then(|r| r.strip_suffix(')'))
            .filter(|url| !url.trim().is_empty())
            .map(|url| Self::Remote(url.trim().to_owned()))
            .ok_or_else(|| format!("expected `fallback` or `remote(<url>)`, got {s:?}"))
    }
}

impl fmt::Display for ProviderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Fallback => f.write_str("fallback"),
            Self::Remote(url) => write!(f, "remote({url})"),
        }
    }
}

impl Serialize for ProviderSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ProviderSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

impl ProviderSpec {
    pub fn build(&self, dims: usize, timeout: Duration) -> Box<dyn EmbeddingProvider> {
        match self {
            Self::Fallback => Box::new(HashingEmbedder::new(dims)),
            Self::Remote(url) => Box::new(RemoteEmbedder::new(url.clone(), dims, timeout)),
        }
    }
}
