//! Report types and their canonical JSON encoding.
//!
//! Canonical JSON has lexicographically sorted object keys and every
//! non-integer number rounded half-to-even to 5 decimal places. Rounding
//! happens only here; analyses keep full precision.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::metrics::MetricTally;
use crate::model::TaskKind;
use crate::reliability::{BootstrapConfig, ResampleUnit};

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DECIMALS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BucketPerformance {
    pub key: String,
    pub n: usize,
    pub value: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub components: MetricTally,
}

/// How the numbers in a report were computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReportMethod {
    pub averaging: String,
    pub ci_method: String,
    pub replicates: usize,
    pub confidence_level: f64,
    pub seed: u64,
    pub resample_unit: ResampleUnit,
}

impl ReportMethod {
    pub fn from_config(config: &BootstrapConfig) -> Self {
        ReportMethod {
            averaging: "micro".into(),
            ci_method: "percentile_bootstrap".into(),
            replicates: config.replicates,
            confidence_level: config.confidence_level,
            seed: config.seed,
            resample_unit: config.resample_unit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AnalysisReport {
    pub system_ids: Vec<String>,
    pub dataset_id: String,
    pub task_kind: TaskKind,
    pub metric_name: String,
    pub overall: BucketPerformance,
    pub per_attribute: BTreeMap<String, Vec<BucketPerformance>>,
    pub method: ReportMethod,
    pub generated_at: String,
    pub engine_version: String,
}

impl AnalysisReport {
    pub fn bucket(&self, attribute: &str, key: &str) -> Option<&BucketPerformance> {
        self.per_attribute.get(attribute)?.iter().find(|b| b.key == key)
    }
}

/// `x` rounded half-to-even at `DECIMALS` places, via the exact decimal
/// expansion of the double.
pub fn round_canonical(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    let r: f64 = format!("{x:.DECIMALS$}").parse().unwrap_or(x);
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn canonicalize(value: &mut Value) {
    match value {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64() {
                if let Some(r) = serde_json::Number::from_f64(round_canonical(x)) {
                    *n = r;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(canonicalize),
        Value::Object(map) => map.values_mut().for_each(canonicalize),
        _ => {}
    }
}

/// Canonical JSON value (sorted keys come from serde_json's default map).
pub fn to_canonical_value<T: Serialize>(value: &T) -> serde_json::Result<Value> {
    let mut v = serde_json::to_value(value)?;
    canonicalize(&mut v);
    Ok(v)
}

pub fn to_canonical_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    serde_json::to_string(&to_canonical_value(value)?)
}
