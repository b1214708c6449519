//! Single-system reports, pairwise gaps, dataset bias profiles and error cases.

mod bias;
mod errors;
mod pair;

pub use bias::{bias_analysis, bias_analysis_with_mode, AttributeProfile, BiasProfile, DatasetSummary};
pub use errors::{
    bucket_errors, common_errors, error_cases, unique_errors, ErrorCase, ErrorKind, ErrorSelector,
    UnitRef,
};
pub use pair::{pair_analysis, pair_from_reports, GapBucket, PairReport, SideValue};

use std::collections::BTreeMap;

use crate::attributes::{attribute_value, Attribute};
use crate::bio::{self, Span};
use crate::bucketing::BucketPlan;
use crate::error::Result;
use crate::metrics::MetricTally;
use crate::model::{Dataset, EvalMode, EvaluationUnit, PredictionPayload, SamplePayload, SystemOutput};
use crate::reliability::{bootstrap_ci, BootstrapConfig};
use crate::report::{AnalysisReport, BucketPerformance, ReportMethod, ENGINE_VERSION};

/// Settings shared by all report-producing analyses.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOptions {
    pub bootstrap: BootstrapConfig,
    pub mode: EvalMode,
    pub generated_at: String,
}

impl AnalysisOptions {
    pub fn new(bootstrap: BootstrapConfig) -> Self {
        AnalysisOptions {
            bootstrap,
            mode: EvalMode::default(),
            generated_at: now_timestamp(),
        }
    }

    pub fn generated_at(mut self, ts: impl Into<String>) -> Self {
        self.generated_at = ts.into();
        self
    }

    pub fn mode(mut self, mode: EvalMode) -> Self {
        self.mode = mode;
        self
    }
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions::new(BootstrapConfig::default())
    }
}

/// Current UTC time as RFC 3339 with second precision, or the time given
/// by `SOURCE_DATE_EPOCH` when set, for reproducible output.
pub fn now_timestamp() -> String {
    let fixed = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|secs| chrono::DateTime::from_timestamp(secs, 0));
    fixed
        .unwrap_or_else(chrono::Utc::now)
        .to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Gold and predicted spans of one sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceSpans {
    pub gold: Vec<Span>,
    pub pred: Vec<Span>,
}

pub fn sentence_spans(dataset: &Dataset, system: &SystemOutput, mode: EvalMode) -> Result<Vec<SentenceSpans>> {
    let mut out = Vec::with_capacity(dataset.len());
    for (sample, pred) in dataset.samples.iter().zip(&system.predictions) {
        match (&sample.payload, &pred.payload) {
            (SamplePayload::Sequence { gold_tags, .. }, PredictionPayload::Sequence { tags }) => {
                out.push(SentenceSpans {
                    gold: bio::extract_spans_with(gold_tags, mode.bio_mode)?,
                    pred: bio::extract_spans_with(tags, mode.bio_mode)?,
                });
            }
            _ => out.push(SentenceSpans {
                gold: Vec::new(),
                pred: Vec::new(),
            }),
        }
    }
    Ok(out)
}

/// An evaluation unit with its contribution to the metric tally.
///
/// Gold units count toward bucket size `n`. For span F1 the non-gold units
/// are predicted spans matching no gold span (false positives), bucketed by
/// their own attribute values.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ScoredUnit {
    pub unit: EvaluationUnit,
    pub tally: MetricTally,
    pub gold: bool,
}

impl ScoredUnit {
    pub fn is_error(&self) -> bool {
        match self.tally {
            MetricTally::Accuracy { correct, .. } => correct == 0,
            MetricTally::SpanF1 { tp, .. } => tp == 0,
            MetricTally::MeanScore { .. } => false,
        }
    }
}

/// Scored units in sample order.
pub(crate) fn scored_units(dataset: &Dataset, system: &SystemOutput, mode: EvalMode) -> Result<Vec<ScoredUnit>> {
    system.check_against(dataset)?;
    let mut units = Vec::new();
    let spans = sentence_spans(dataset, system, mode)?;
    for ((sample, pred), sent) in dataset.samples.iter().zip(&system.predictions).zip(spans) {
        let sample_id = sample.id;
        match (&sample.payload, &pred.payload) {
            (SamplePayload::Classification { gold_label, .. }, PredictionPayload::Classification { label, .. }) => {
                units.push(ScoredUnit {
                    unit: EvaluationUnit::Sample { sample_id },
                    tally: MetricTally::Accuracy {
                        correct: (gold_label == label) as u64,
                        total: 1,
                    },
                    gold: true,
                });
            }
            (SamplePayload::Scored { .. }, PredictionPayload::Scored { score }) => {
                units.push(ScoredUnit {
                    unit: EvaluationUnit::Sample { sample_id },
                    tally: MetricTally::MeanScore { sum: *score, n: 1 },
                    gold: true,
                });
            }
            (SamplePayload::Sequence { .. }, PredictionPayload::Sequence { .. }) => {
                for g in &sent.gold {
                    let hit = sent.pred.contains(g);
                    units.push(ScoredUnit {
                        unit: EvaluationUnit::Span {
                            sample_id,
                            span: g.clone(),
                        },
                        tally: MetricTally::SpanF1 {
                            tp: hit as u64,
                            fp: 0,
                            fn_: (!hit) as u64,
                        },
                        gold: true,
                    });
                }
                for p in sent.pred.iter().filter(|p| !sent.gold.contains(p)) {
                    units.push(ScoredUnit {
                        unit: EvaluationUnit::Span {
                            sample_id,
                            span: p.clone(),
                        },
                        tally: MetricTally::SpanF1 { tp: 0, fp: 1, fn_: 0 },
                        gold: false,
                    });
                }
            }
            _ => unreachable!("check_against guarantees matching payloads"),
        }
    }
    Ok(units)
}

/// Overall metric value without confidence intervals.
pub fn overall_value(system: &SystemOutput, dataset: &Dataset, mode: EvalMode) -> Result<Option<f64>> {
    let units = scored_units(dataset, system, mode)?;
    let mut total = MetricTally::zero(dataset.task.metric());
    let mut n = 0usize;
    for u in &units {
        total += u.tally;
        n += u.gold as usize;
    }
    Ok((n > 0).then(|| total.score()))
}

/// Accumulates one bucket: summed tally, gold count, and per-sample tallies
/// of the samples contributing to it (for resampling).
struct BucketAccumulator {
    tally: MetricTally,
    n: usize,
    per_sample: Vec<MetricTally>,
    last_sample: Option<usize>,
}

impl BucketAccumulator {
    fn new(zero: MetricTally) -> Self {
        BucketAccumulator {
            tally: zero,
            n: 0,
            per_sample: Vec::new(),
            last_sample: None,
        }
    }

    fn add(&mut self, unit: &ScoredUnit) {
        self.tally += unit.tally;
        self.n += unit.gold as usize;
        let sid = unit.unit.sample_id();
        match (self.last_sample, self.per_sample.last_mut()) {
            (Some(last), Some(t)) if last == sid => *t += unit.tally,
            _ => {
                self.per_sample.push(unit.tally);
                self.last_sample = Some(sid);
            }
        }
    }

    fn finish(self, key: String, config: &BootstrapConfig) -> Result<BucketPerformance> {
        performance(key, self.n, self.tally, &self.per_sample, config)
    }
}

fn performance(
    key: String,
    n: usize,
    tally: MetricTally,
    per_sample: &[MetricTally],
    config: &BootstrapConfig,
) -> Result<BucketPerformance> {
    if n == 0 {
        return Ok(BucketPerformance {
            key,
            n,
            value: None,
            ci_low: None,
            ci_high: None,
            components: tally,
        });
    }
    let value = tally.score();
    let ci = bootstrap_ci(per_sample, config)?;
    // The reported interval always brackets the point estimate.
    Ok(BucketPerformance {
        key,
        n,
        value: Some(value),
        ci_low: Some(ci.low.min(value)),
        ci_high: Some(ci.high.max(value)),
        components: tally,
    })
}

/// Performance histogram of one system over the requested attributes.
pub fn single_analysis(
    system: &SystemOutput,
    dataset: &Dataset,
    attributes: &[Attribute],
    options: &AnalysisOptions,
) -> Result<AnalysisReport> {
    system.check_against(dataset)?;
    let plan = BucketPlan::build(dataset, attributes, options.mode)?;
    single_analysis_with_plan(system, dataset, &plan, options)
}

/// Same as [`single_analysis`] with precomputed bucketing rules.
pub fn single_analysis_with_plan(
    system: &SystemOutput,
    dataset: &Dataset,
    plan: &BucketPlan,
    options: &AnalysisOptions,
) -> Result<AnalysisReport> {
    options.bootstrap.validate()?;
    let units = scored_units(dataset, system, plan.mode)?;
    let kind = dataset.task.metric();
    let zero = MetricTally::zero(kind);

    let mut per_sample = vec![zero; dataset.len()];
    let mut total = zero;
    let mut n = 0usize;
    for u in &units {
        per_sample[u.unit.sample_id()] += u.tally;
        total += u.tally;
        n += u.gold as usize;
    }
    let overall = performance("all".into(), n, total, &per_sample, &options.bootstrap)?;

    let mut per_attribute = BTreeMap::new();
    for (attr, rule) in &plan.entries {
        let mut buckets: Vec<BucketAccumulator> = (0..rule.len()).map(|_| BucketAccumulator::new(zero)).collect();
        for u in &units {
            let value = attribute_value(*attr, &u.unit, dataset, plan.mode.strict_attributes)?;
            if let Some(b) = rule.assign(&value) {
                buckets[b].add(u);
            }
        }
        let series = rule
            .keys()
            .into_iter()
            .zip(buckets)
            .map(|(key, acc)| acc.finish(key.to_string(), &options.bootstrap))
            .collect::<Result<Vec<_>>>()?;
        per_attribute.insert(attr.name().to_string(), series);
    }

    Ok(AnalysisReport {
        system_ids: vec![system.id.clone()],
        dataset_id: dataset.id.clone(),
        task_kind: dataset.task,
        metric_name: kind.name().to_string(),
        overall,
        per_attribute,
        method: ReportMethod::from_config(&options.bootstrap),
        generated_at: options.generated_at.clone(),
        engine_version: ENGINE_VERSION.to_string(),
    })
}
