use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::attributes::{attribute_value, Attribute, AttributeValue, ValueKind};
use crate::error::{Error, Result};
use crate::model::{Dataset, EvalMode, TaskKind};

/// Attribute summary of one dataset's gold units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DatasetSummary {
    pub dataset_id: String,
    pub n: usize,
    /// Mean value for continuous attributes, null when there are no units.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    /// Relative frequency of each category for categorical attributes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distribution: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AttributeProfile {
    pub datasets: Vec<DatasetSummary>,
    /// Dataset ids by descending mean (continuous attributes only).
    pub ranked_by_mean: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BiasProfile {
    pub dataset_ids: Vec<String>,
    pub task_kind: TaskKind,
    pub per_attribute: BTreeMap<String, AttributeProfile>,
}

impl BiasProfile {
    pub fn summary(&self, attribute: &str, dataset_id: &str) -> Option<&DatasetSummary> {
        self.per_attribute
            .get(attribute)?
            .datasets
            .iter()
            .find(|d| d.dataset_id == dataset_id)
    }
}

fn summarize(dataset: &Dataset, attr: Attribute, mode: EvalMode) -> Result<DatasetSummary> {
    let units = dataset.gold_units(mode.bio_mode)?;
    let values = units
        .iter()
        .map(|u| attribute_value(attr, u, dataset, mode.strict_attributes))
        .collect::<Result<Vec<_>>>()?;
    let n = values.len();
    let mut summary = DatasetSummary {
        dataset_id: dataset.id.clone(),
        n,
        mean: None,
        distribution: None,
    };
    match attr.value_kind() {
        ValueKind::Continuous => {
            let sum: f64 = values.iter().filter_map(AttributeValue::as_number).sum();
            summary.mean = (n > 0).then(|| sum / n as f64);
        }
        ValueKind::Categorical => {
            let mut counts: BTreeMap<String, usize> = BTreeMap::new();
            for v in &values {
                if let AttributeValue::Category(c) = v {
                    *counts.entry(c.clone()).or_default() += 1;
                }
            }
            summary.distribution = Some(counts.into_iter().map(|(k, c)| (k, c as f64 / n as f64)).collect());
        }
    }
    Ok(summary)
}

/// Per-dataset attribute statistics over gold annotations.
pub fn bias_analysis(datasets: &[&Dataset], attributes: &[Attribute]) -> Result<BiasProfile> {
    bias_analysis_with_mode(datasets, attributes, EvalMode::default())
}

pub fn bias_analysis_with_mode(datasets: &[&Dataset], attributes: &[Attribute], mode: EvalMode) -> Result<BiasProfile> {
    let first = datasets.first().ok_or(Error::NoData)?;
    let task = first.task;
    if let Some(other) = datasets.iter().find(|d| d.task != task) {
        return Err(Error::TaskMismatch {
            expected: task,
            found: other.task,
        });
    }
    let attributes = if attributes.is_empty() {
        Attribute::defaults_for(task)
    } else {
        attributes.to_vec()
    };
    let mut per_attribute = BTreeMap::new();
    for attr in attributes {
        if !attr.applies_to(task) {
            return Err(Error::UnknownAttribute {
                name: attr.name().to_string(),
                task,
            });
        }
        let summaries = datasets
            .iter()
            .map(|d| summarize(d, attr, mode))
            .collect::<Result<Vec<_>>>()?;
        let mut ranked: Vec<&DatasetSummary> = summaries.iter().filter(|s| s.mean.is_some()).collect();
        ranked.sort_by(|x, y| y.mean.unwrap().total_cmp(&x.mean.unwrap()).then_with(|| x.dataset_id.cmp(&y.dataset_id)));
        let ranked_by_mean = ranked.into_iter().map(|s| s.dataset_id.clone()).collect();
        per_attribute.insert(
            attr.name().to_string(),
            AttributeProfile {
                datasets: summaries,
                ranked_by_mean,
            },
        );
    }
    Ok(BiasProfile {
        dataset_ids: datasets.iter().map(|d| d.id.clone()).collect(),
        task_kind: task,
        per_attribute,
    })
}
