//! Evaluation harness: rubric aggregation, quality distribution, coverage,
//! similarity-quality correlation and answer lengths.

mod report;
mod stats;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use report::{
    build_report, reference_checks, write_report, ComparisonReport, PublishedReference,
    ReferenceCheck, SystemLabels,
};
pub use stats::{average_ranks, mean, pearson, round_half_up, spearman};

use crate::embedding::{cosine, EmbeddingError, EmbeddingProvider};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no records")]
    Empty,
    #[error("record {question_id}: {reason}")]
    InvalidRecord { question_id: String, reason: String },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("baseline must be > 0, got {0}")]
    NonPositiveBaseline(f64),
    #[error(transparent)]
    Provider(#[from] EmbeddingError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl EvalError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QualityLabel {
    High,
    Moderate,
    Poor,
}

pub const METRICS: [&str; 5] = [
    "relevance",
    "completeness",
    "actionability",
    "contextual_richness",
    "specificity",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rubric {
    pub relevance: f64,
    pub completeness: f64,
    pub actionability: f64,
    pub contextual_richness: f64,
    pub specificity: f64,
}

impl Rubric {
    pub fn from_array(v: [f64; 5]) -> Self {
        Self {
            relevance: v[0],
            completeness: v[1],
            actionability: v[2],
            contextual_richness: v[3],
            specificity: v[4],
        }
    }

    pub fn as_array(&self) -> [f64; 5] {
        [
            self.relevance,
            self.completeness,
            self.actionability,
            self.contextual_richness,
            self.specificity,
        ]
    }

    pub fn composite(&self) -> f64 {
        composite(&self.as_array())
    }
}

/// Unweighted mean of the five metric values.
pub fn composite(means: &[f64; 5]) -> f64 {
    means.iter().sum::<f64>() / 5.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalRecord {
    pub question_id: String,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_context: Option<String>,
    pub system_answer: String,
    pub quality_label: QualityLabel,
    pub rubric: Rubric,
    pub answer_chars: usize,
}

impl EvalRecord {
    pub fn validate(&self) -> Result<(), EvalError> {
        let invalid = |reason: String| EvalError::InvalidRecord {
            question_id: self.question_id.clone(),
            reason,
        };
        for (name, v) in METRICS.iter().zip(self.rubric.as_array()) {
            if !(1.0..=5.0).contains(&v) {
                return Err(invalid(format!("{name} = {v} is outside [1, 5]")));
            }
        }
        let chars = self.system_answer.chars().count();
        if chars != self.answer_chars {
            return Err(invalid(format!(
                "answer_chars is {} but the answer has {chars} characters",
                self.answer_chars
            )));
        }
        Ok(())
    }
}

pub const COVERAGE_FEATURES: [&str; 6] = [
    "cause_explanation",
    "immediate_actions",
    "prevention_measures",
    "specific_dosages",
    "variety_recommendations",
    "expert_referral",
];

fn default_system() -> String {
    "candidate".into()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageRecord {
    pub question_id: String,
    /// Which system the answer came from; one file can hold both.
    #[serde(default = "default_system")]
    pub system: String,
    pub features: BTreeMap<String, bool>,
}

impl CoverageRecord {
    pub fn validate(&self) -> Result<(), EvalError> {
        let keys: Vec<&str> = self.features.keys().map(String::as_str).collect();
        let mut expected = COVERAGE_FEATURES.to_vec();
        expected.sort_unstable();
        if keys != expected {
            return Err(EvalError::InvalidRecord {
                question_id: self.question_id.clone(),
                reason: format!("features must be exactly {COVERAGE_FEATURES:?}"),
            });
        }
        Ok(())
    }
}

/// Parse a JSONL file, skipping blank lines.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, EvalError> {
    let text = fs::read_to_string(path).map_err(|e| EvalError::io(path, e))?;
    parse_jsonl(&text, &path.display().to_string())
}

pub fn parse_jsonl<T: DeserializeOwned>(text: &str, origin: &str) -> Result<Vec<T>, EvalError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| EvalError::Parse {
                path: origin.to_owned(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn read_eval_records(path: &Path) -> Result<Vec<EvalRecord>, EvalError> {
    let records: Vec<EvalRecord> = read_jsonl(path)?;
    records.iter().try_for_each(EvalRecord::validate)?;
    Ok(records)
}

pub fn read_coverage_records(path: &Path) -> Result<Vec<CoverageRecord>, EvalError> {
    let records: Vec<CoverageRecord> = read_jsonl(path)?;
    records.iter().try_for_each(CoverageRecord::validate)?;
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RubricSummary {
    pub n: usize,
    pub means: Rubric,
    pub composite: f64,
    pub composite_display: f64,
}

pub fn aggregate_rubric(records: &[EvalRecord]) -> Result<RubricSummary, EvalError> {
    if records.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut sums = [0.0; 5];
    for r in records {
        for (s, v) in sums.iter_mut().zip(r.rubric.as_array()) {
            *s += v;
        }
    }
    let means = sums.map(|s| s / records.len() as f64);
    let composite = composite(&means);
    Ok(RubricSummary {
        n: records.len(),
        means: Rubric::from_array(means),
        composite,
        composite_display: round_half_up(composite, 2),
    })
}

/// `100 * (candidate - baseline) / baseline`.
pub fn percent_gain(candidate: f64, baseline: f64) -> Result<f64, EvalError> {
    if !(baseline > 0.0) {
        return Err(EvalError::NonPositiveBaseline(baseline));
    }
    Ok(100.0 * (candidate - baseline) / baseline)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityDistribution {
    pub n: usize,
    pub counts: BTreeMap<QualityLabel, usize>,
    /// Percentages at full precision.
    pub percent: BTreeMap<QualityLabel, f64>,
    /// Percentages rounded to one decimal.
    pub percent_display: BTreeMap<QualityLabel, f64>,
}

pub fn quality_distribution(labels: &[QualityLabel]) -> Result<QualityDistribution, EvalError> {
    if labels.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut counts: BTreeMap<QualityLabel, usize> = [QualityLabel::High, QualityLabel::Moderate, QualityLabel::Poor]
        .into_iter()
        .map(|l| (l, 0))
        .collect();
    for l in labels {
        *counts.entry(*l).or_default() += 1;
    }
    let n = labels.len();
    let percent: BTreeMap<QualityLabel, f64> = counts
        .iter()
        .map(|(l, c)| (*l, 100.0 * *c as f64 / n as f64))
        .collect();
    let percent_display = percent.iter().map(|(l, p)| (*l, round_half_up(*p, 1))).collect();
    Ok(QualityDistribution {
        n,
        counts,
        percent,
        percent_display,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub n: usize,
    /// Share of records with each feature present.
    pub per_feature: BTreeMap<String, f64>,
    /// Unweighted mean of the per-feature shares, in [0, 1].
    pub overall: f64,
    /// `overall` as a percentage rounded to one decimal.
    pub overall_percent_display: f64,
}

pub fn coverage_average(records: &[CoverageRecord]) -> Result<CoverageSummary, EvalError> {
    if records.is_empty() {
        return Err(EvalError::Empty);
    }
    records.iter().try_for_each(CoverageRecord::validate)?;
    let per_feature: BTreeMap<String, f64> = COVERAGE_FEATURES
        .iter()
        .map(|f| {
            let hits = records.iter().filter(|r| r.features[*f]).count();
            (f.to_string(), hits as f64 / records.len() as f64)
        })
        .collect();
    let overall = per_feature.values().sum::<f64>() / COVERAGE_FEATURES.len() as f64;
    Ok(CoverageSummary {
        n: records.len(),
        per_feature,
        overall,
        overall_percent_display: round_half_up(100.0 * overall, 1),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub question_id: String,
    pub similarity: f64,
    pub composite: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityQuality {
    pub points: Vec<ScatterPoint>,
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
}

/// Cosine similarity of question and answer embeddings against the record's
/// rubric composite.
pub fn similarity_quality(
    records: &[EvalRecord],
    provider: &dyn EmbeddingProvider,
) -> Result<SimilarityQuality, EvalError> {
    if records.is_empty() {
        return Err(EvalError::Empty);
    }
    let texts: Vec<&str> = records
        .iter()
        .flat_map(|r| [r.question.as_str(), r.system_answer.as_str()])
        .collect();
    let vectors = provider.embed_batch(&texts)?;
    let points = records
        .iter()
        .zip(vectors.chunks(2))
        .map(|(r, pair)| {
            Ok(ScatterPoint {
                question_id: r.question_id.clone(),
                similarity: cosine(&pair[0], &pair[1])?,
                composite: r.rubric.composite(),
            })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    Ok(similarity_from_points(points))
}

pub fn similarity_from_points(points: Vec<ScatterPoint>) -> SimilarityQuality {
    let xs: Vec<f64> = points.iter().map(|p| p.similarity).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.composite).collect();
    SimilarityQuality {
        pearson: pearson(&xs, &ys),
        spearman: spearman(&xs, &ys),
        points,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    pub mean_chars_candidate: f64,
    pub mean_chars_baseline: f64,
    pub ratio: f64,
    pub ratio_display: f64,
}

pub fn length_ratio(mean_candidate: f64, mean_baseline: f64) -> Result<LengthStats, EvalError> {
    if !(mean_baseline > 0.0) {
        return Err(EvalError::NonPositiveBaseline(mean_baseline));
    }
    let ratio = mean_candidate / mean_baseline;
    Ok(LengthStats {
        mean_chars_candidate: mean_candidate,
        mean_chars_baseline: mean_baseline,
        ratio,
        ratio_display: round_half_up(ratio, 1),
    })
}

pub fn length_stats(candidate: &[EvalRecord], baseline: &[EvalRecord]) -> Result<LengthStats, EvalError> {
    if candidate.is_empty() || baseline.is_empty() {
        return Err(EvalError::Empty);
    }
    let avg = |rs: &[EvalRecord]| rs.iter().map(|r| r.answer_chars as f64).sum::<f64>() / rs.len() as f64;
    length_ratio(avg(candidate), avg(baseline))
}
