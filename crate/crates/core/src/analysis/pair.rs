use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{single_analysis_with_plan, AnalysisOptions};
use crate::attributes::Attribute;
use crate::bucketing::BucketPlan;
use crate::error::{Error, Result};
use crate::model::{Dataset, SystemOutput, TaskKind};
use crate::report::{AnalysisReport, BucketPerformance, ReportMethod};

/// One side of a gap: the single-system value and its interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SideValue {
    pub value: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

impl From<&BucketPerformance> for SideValue {
    fn from(b: &BucketPerformance) -> Self {
        SideValue {
            value: b.value,
            ci_low: b.ci_low,
            ci_high: b.ci_high,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GapBucket {
    pub key: String,
    pub n: usize,
    /// `a.value - b.value`; null when either side is null.
    pub gap: Option<f64>,
    pub a: SideValue,
    pub b: SideValue,
}

impl GapBucket {
    fn new(a: &BucketPerformance, b: &BucketPerformance) -> Self {
        GapBucket {
            key: a.key.clone(),
            n: a.n,
            gap: a.value.zip(b.value).map(|(x, y)| x - y),
            a: a.into(),
            b: b.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PairReport {
    pub system_a: String,
    pub system_b: String,
    pub dataset_id: String,
    pub task_kind: TaskKind,
    pub metric_name: String,
    pub overall: GapBucket,
    pub overall_gap: Option<f64>,
    pub per_attribute: BTreeMap<String, Vec<GapBucket>>,
    pub method: ReportMethod,
    pub generated_at: String,
    pub engine_version: String,
}

/// Bucketwise gap `a - b` over one shared set of bucketing rules.
pub fn pair_analysis(
    a: &SystemOutput,
    b: &SystemOutput,
    dataset: &Dataset,
    attributes: &[Attribute],
    options: &AnalysisOptions,
) -> Result<PairReport> {
    if a.task != b.task {
        return Err(Error::TaskMismatch {
            expected: a.task,
            found: b.task,
        });
    }
    a.check_against(dataset)?;
    b.check_against(dataset)?;
    let plan = BucketPlan::build(dataset, attributes, options.mode)?;
    let ra = single_analysis_with_plan(a, dataset, &plan, options)?;
    let rb = single_analysis_with_plan(b, dataset, &plan, options)?;
    pair_from_reports(&ra, &rb)
}

/// Combines two single reports computed on the same dataset and buckets.
pub fn pair_from_reports(a: &AnalysisReport, b: &AnalysisReport) -> Result<PairReport> {
    if a.dataset_id != b.dataset_id {
        return Err(Error::DatasetMismatch);
    }
    if a.task_kind != b.task_kind {
        return Err(Error::TaskMismatch {
            expected: a.task_kind,
            found: b.task_kind,
        });
    }
    let mut per_attribute = BTreeMap::new();
    for (attr, series_a) in &a.per_attribute {
        let series_b = b.per_attribute.get(attr).ok_or(Error::DatasetMismatch)?;
        if series_a.len() != series_b.len() || series_a.iter().zip(series_b).any(|(x, y)| x.key != y.key || x.n != y.n) {
            return Err(Error::DatasetMismatch);
        }
        let gaps = series_a.iter().zip(series_b).map(|(x, y)| GapBucket::new(x, y)).collect();
        per_attribute.insert(attr.clone(), gaps);
    }
    let overall = GapBucket::new(&a.overall, &b.overall);
    Ok(PairReport {
        system_a: a.system_ids.join(","),
        system_b: b.system_ids.join(","),
        dataset_id: a.dataset_id.clone(),
        task_kind: a.task_kind,
        metric_name: a.metric_name.clone(),
        overall_gap: overall.gap,
        overall,
        per_attribute,
        method: a.method.clone(),
        generated_at: a.generated_at.clone(),
        engine_version: a.engine_version.clone(),
    })
}
