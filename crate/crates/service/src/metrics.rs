//! Prometheus counters exposed at `/metrics`.

use prometheus::{Encoder, Histogram, HistogramOpts, IntCounter, Registry, TextEncoder};

#[derive(Clone)]
pub struct Metrics {
    registry: Registry,
    pub queries_total: IntCounter,
    pub retrieval_latency: Histogram,
    pub grounding_flags_total: IntCounter,
}

impl Metrics {
    pub fn new() -> Self {
        let registry = Registry::new();
        let queries_total =
            IntCounter::new("queries_total", "Questions answered via /query or /voice/turn").unwrap();
        let retrieval_latency = Histogram::with_opts(
            HistogramOpts::new("retrieval_latency_seconds", "Embed, search and rerank time per query")
                .buckets(vec![0.001, 0.0025, 0.005, 0.01, 0.025, 0.05, 0.1, 0.25, 0.5, 1.0]),
        )
        .unwrap();
        let grounding_flags_total =
            IntCounter::new("grounding_flags_total", "Answer sentences flagged as unsupported").unwrap();
        registry.register(Box::new(queries_total.clone())).unwrap();
        registry.register(Box::new(retrieval_latency.clone())).unwrap();
        registry.register(Box::new(grounding_flags_total.clone())).unwrap();
        Self {
            registry,
            queries_total,
            retrieval_latency,
            grounding_flags_total,
        }
    }

    pub fn render(&self) -> String {
        let mut buf = Vec::new();
        TextEncoder::new()
            .encode(&self.registry.gather(), &mut buf)
            .expect("text encoding cannot fail");
        String::from_utf8(buf).expect("prometheus text is UTF-8")
    }
}

impl Default for Metrics {
    fn default() -> Self {
        Self::new()
    }
}
