//! Comparison report assembly and emission.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    aggregate_rubric, coverage_average, length_stats, percent_gain, quality_distribution,
    round_half_up, similarity_quality, CoverageRecord, CoverageSummary, EvalError, EvalRecord,
    LengthStats, QualityDistribution, QualityLabel, RubricSummary, SimilarityQuality, METRICS,
};
use crate::embedding::EmbeddingProvider;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemLabels {
    pub candidate: String,
    pub baseline: String,
}

impl Default for SystemLabels {
    fn default() -> Self {
        Self {
            candidate: "candidate".into(),
            baseline: "baseline".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricGain {
    pub metric: String,
    pub candidate_mean: f64,
    pub baseline_mean: f64,
    pub gain_percent: f64,
    pub gain_display: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeComparison {
    pub candidate_display: f64,
    pub baseline_display: f64,
    /// Gain between the displayed (two-decimal) composites.
    pub gain_percent: f64,
    pub gain_display: f64,
    /// Gain between the full-precision composites.
    pub gain_percent_raw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageComparison {
    pub candidate: Option<CoverageSummary>,
    pub baseline: Option<CoverageSummary>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PublishedValue {
    pub value: f64,
    #[serde(default)]
    pub tolerance: f64,
}

/// Externally reported display values keyed like [`ComparisonReport::display_values`].
pub type PublishedReference = BTreeMap<String, PublishedValue>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCheck {
    pub key: String,
    pub computed: Option<f64>,
    pub published: f64,
    pub tolerance: f64,
    pub matches: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub systems: SystemLabels,
    pub rubric_candidate: RubricSummary,
    pub rubric_baseline: RubricSummary,
    pub metric_gains: Vec<MetricGain>,
    pub composite: CompositeComparison,
    pub lengths: LengthStats,
    pub quality_distribution: QualityDistribution,
    pub coverage: CoverageComparison,
    pub similarity: SimilarityQuality,
    pub reference_checks: Vec<ReferenceCheck>,
}

fn label_key(l: QualityLabel) -> &'static str {
    match l {
        QualityLabel::High => "high",
        QualityLabel::Moderate => "moderate",
        QualityLabel::Poor => "poor",
    }
}

impl ComparisonReport {
    /// Every display-precision figure with its number of decimals.
    pub fn display_values(&self) -> Vec<(String, f64, usize)> {
        let mut v = vec![
            ("composite.candidate".to_owned(), self.composite.candidate_display, 2),
            ("composite.baseline".to_owned(), self.composite.baseline_display, 2),
            ("composite.gain".to_owned(), self.composite.gain_display, 1),
        ];
        for g in &self.metric_gains {
            v.push((format!("mean.candidate.{}", g.metric), round_half_up(g.candidate_mean, 2), 2));
            v.push((format!("mean.baseline.{}", g.metric), round_half_up(g.baseline_mean, 2), 2));
            v.push((format!("gain.{}", g.metric), g.gain_display, 1));
        }
        v.push(("length.candidate".into(), round_half_up(self.lengths.mean_chars_candidate, 1), 1));
        v.push(("length.baseline".into(), round_half_up(self.lengths.mean_chars_baseline, 1), 1));
        v.push(("length.ratio".into(), self.lengths.ratio_display, 1));
        for (l, p) in &self.quality_distribution.percent_display {
            v.push((format!("quality.{}", label_key(*l)), *p, 1));
        }
        if let Some(c) = &self.coverage.candidate {
            v.push(("coverage.candidate".into(), c.overall_percent_display, 1));
        }
        if let Some(c) = &self.coverage.baseline {
            v.push(("coverage.baseline".into(), c.overall_percent_display, 1));
        }
        if let Some(r) = self.similarity.pearson {
            v.push(("similarity.pearson".into(), round_half_up(r, 4), 4));
        }
        if let Some(r) = self.similarity.spearman {
            v.push(("similarity.spearman".into(), round_half_up(r, 4), 4));
        }
        v
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report is always serializable");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("key,value\n");
        for (k, v, d) in self.display_values() {
            let _ = writeln!(out, "{k},{v:.d$}");
        }
        for c in &self.reference_checks {
            let computed = c.computed.map_or(String::new(), |v| v.to_string());
            let _ = writeln!(
                out,
                "reference.{},{computed} vs {} ({})",
                c.key,
                c.published,
                if c.matches { "match" } else { "DISCREPANCY" }
            );
        }
        out
    }
}

pub fn reference_checks(report: &ComparisonReport, published: &PublishedReference) -> Vec<ReferenceCheck> {
    let values: BTreeMap<String, f64> = report
        .display_values()
        .into_iter()
        .map(|(k, v, _)| (k, v))
        .collect();
    published
        .iter()
        .map(|(key, p)| {
            let computed = values.get(key).copied();
            ReferenceCheck {
                key: key.clone(),
                computed,
                published: p.value,
                tolerance: p.tolerance,
                matches: computed.is_some_and(|c| (c - p.value).abs() <= p.tolerance + 1e-9),
            }
        })
        .collect()
}

pub fn build_report(
    candidate: &[EvalRecord],
    baseline: &[EvalRecord],
    coverage: &[CoverageRecord],
    provider: &dyn EmbeddingProvider,
    systems: &SystemLabels,
    published: Option<&PublishedReference>,
) -> Result<ComparisonReport, EvalError> {
    let rc = aggregate_rubric(candidate)?;
    let rb = aggregate_rubric(baseline)?;
    let metric_gains = METRICS
        .iter()
        .zip(rc.means.as_array().into_iter().zip(rb.means.as_array()))
        .map(|(m, (c, b))| {
            let gain = percent_gain(c, b)?;
            Ok(MetricGain {
                metric: (*m).to_owned(),
                candidate_mean: c,
                baseline_mean: b,
                gain_percent: gain,
                gain_display: round_half_up(gain, 1),
            })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    let gain = percent_gain(rc.composite_display, rb.composite_display)?;
    let composite = CompositeComparison {
        candidate_display: rc.composite_display,
        baseline_display: rb.composite_display,
        gain_percent: gain,
        gain_display: round_half_up(gain, 1),
        gain_percent_raw: percent_gain(rc.composite, rb.composite)?,
    };
    let labels: Vec<QualityLabel> = candidate.iter().map(|r| r.quality_label).collect();
    let group = |system: &str| -> Result<Option<CoverageSummary>, EvalError> {
        let rows: Vec<CoverageRecord> = coverage.iter().filter(|r| r.system == system).cloned().collect();
        if rows.is_empty() {
            Ok(None)
        } else {
            coverage_average(&rows).map(Some)
        }
    };
    let mut report = ComparisonReport {
        systems: systems.clone(),
        lengths: length_stats(candidate, baseline)?,
        quality_distribution: quality_distribution(&labels)?,
        coverage: CoverageComparison {
            candidate: group(&systems.candidate)?,
            baseline: group(&systems.baseline)?,
        },
        similarity: similarity_quality(candidate, provider)?,
        rubric_candidate: rc,
        rubric_baseline: rb,
        metric_gains,
        composite,
        reference_checks: Vec::new(),
    };
    if let Some(p) = published {
        report.reference_checks = reference_checks(&report, p);
    }
    Ok(report)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// Write report.json, report.csv and the plot-data files into `dir`.
pub fn write_report(report: &ComparisonReport, dir: &Path) -> Result<(), EvalError> {
    fs::create_dir_all(dir).map_err(|e| EvalError::io(dir, e))?;
    let write = |name: &str, body: String| {
        let p = dir.join(name);
        fs::write(&p, body).map_err(|e| EvalError::io(&p, e))
    };
    write("report.json", report.to_json())?;
    write("report.csv", report.to_csv())?;

    let mut dist = String::from("label,count,percent\n");
    for (l, c) in &report.quality_distribution.counts {
        let p = report.quality_distribution.percent_display[l];
        let _ = writeln!(dist, "{},{c},{p:.1}", label_key(*l));
    }
    write("plot_distribution.csv", dist)?;

    let mut radar = format!(
        "metric,{},{}\n",
        csv_field(&report.systems.candidate),
        csv_field(&report.systems.baseline)
    );
    let mut gains = String::from("metric,gain_percent\n");
    for g in &report.metric_gains {
        let _ = writeln!(
            radar,
            "{},{:.2},{:.2}",
            g.metric,
            round_half_up(g.candidate_mean, 2),
            round_half_up(g.baseline_mean, 2)
        );
        let _ = writeln!(gains, "{},{:.1}", g.metric, g.gain_display);
    }
    let _ = writeln!(
        radar,
        "composite,{:.2},{:.2}",
        report.composite.candidate_display, report.composite.baseline_display
    );
    let _ = writeln!(gains, "composite,{:.1}", report.composite.gain_display);
    write("plot_radar.csv", radar)?;
    write("plot_gain.csv", gains)?;

    let mut scatter = String::from("question_id,similarity,composite\n");
    for p in &report.similarity.points {
        let _ = writeln!(scatter, "{},{},{}", csv_field(&p.question_id), p.similarity, p.composite);
    }
    write("plot_scatter.csv", scatter)?;
    Ok(())
}
