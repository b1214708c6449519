use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::scored_units;
use crate::attributes::attribute_value;
use crate::bucketing::{BucketAddress, BucketPlan};
use crate::error::{Error, Result};
use crate::model::{Dataset, EvalMode, EvaluationUnit, PredictionPayload, SamplePayload, SystemOutput, TaskKind};

const CONTEXT_CHARS: usize = 256;

/// What went wrong with a unit. Span units are either gold spans the
/// system did not recover exactly, or predicted spans absent from gold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Mislabeled,
    Missed,
    Spurious,
}

pub type UnitRef = EvaluationUnit;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ErrorCase {
    pub sample_id: usize,
    pub unit: UnitRef,
    pub error_kind: ErrorKind,
    pub gold: String,
    /// System id to what that system predicted for the unit.
    pub predicted: BTreeMap<String, String>,
    pub context: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ErrorSelector {
    /// Errors of one system inside one bucket.
    Bucket(BucketAddress),
    /// Units every given system gets wrong.
    Common,
    /// Units the first system gets right and the second gets wrong.
    UniqueTo,
}

type ErrorKey = (EvaluationUnit, ErrorKind);

fn error_set(dataset: &Dataset, system: &SystemOutput, mode: EvalMode) -> Result<BTreeSet<ErrorKey>> {
    let units = scored_units(dataset, system, mode)?;
    Ok(units
        .into_iter()
        .filter(|u| u.is_error())
        .map(|u| {
            let kind = match (&u.unit, u.gold) {
                (EvaluationUnit::Sample { .. }, _) => ErrorKind::Mislabeled,
                (EvaluationUnit::Span { .. }, true) => ErrorKind::Missed,
                (EvaluationUnit::Span { .. }, false) => ErrorKind::Spurious,
            };
            (u.unit, kind)
        })
        .collect())
}

fn context(dataset: &Dataset, sample_id: usize) -> String {
    match &dataset.samples[sample_id].payload {
        SamplePayload::Classification { text, .. } => text.chars().take(CONTEXT_CHARS).collect(),
        SamplePayload::Sequence { tokens, .. } => tokens.join(" "),
        SamplePayload::Scored { source_id, .. } => source_id.clone(),
    }
}

fn describe(dataset: &Dataset, systems: &[&SystemOutput], (unit, kind): ErrorKey, mode: EvalMode) -> Result<ErrorCase> {
    let sample_id = unit.sample_id();
    let gold = match (&dataset.samples[sample_id].payload, kind, unit.span()) {
        (SamplePayload::Classification { gold_label, .. }, _, _) => gold_label.clone(),
        (_, ErrorKind::Missed, Some(span)) => span.label.clone(),
        _ => "O".to_string(),
    };
    let mut predicted = BTreeMap::new();
    for system in systems {
        let value = match (&system.predictions[sample_id].payload, unit.span()) {
            (PredictionPayload::Classification { label, .. }, _) => label.clone(),
            (PredictionPayload::Sequence { tags }, Some(span)) => crate::bio::extract_spans_with(tags, mode.bio_mode)?
                .into_iter()
                .find(|p| p.same_extent(span))
                .map_or_else(|| "O".to_string(), |p| p.label),
            (PredictionPayload::Scored { score }, _) => score.to_string(),
            (PredictionPayload::Sequence { .. }, None) => String::new(),
        };
        predicted.insert(system.id.clone(), value);
    }
    Ok(ErrorCase {
        sample_id,
        context: context(dataset, sample_id),
        unit,
        error_kind: kind,
        gold,
        predicted,
    })
}

/// Error cases selected by `selector`, ordered by sample id then span start.
pub fn error_cases(
    systems: &[&SystemOutput],
    dataset: &Dataset,
    selector: &ErrorSelector,
    mode: EvalMode,
) -> Result<Vec<ErrorCase>> {
    if dataset.task == TaskKind::ScoredGeneration {
        return Err(Error::ErrorAnalysisUnsupportedTask(dataset.task));
    }
    let selected: BTreeSet<ErrorKey> = match selector {
        ErrorSelector::Bucket(address) => {
            if systems.len() != 1 {
                return Err(Error::NeedOneSystem(systems.len()));
            }
            let attr = crate::attributes::Attribute::parse(&address.attribute, dataset.task)
                .map_err(|_| Error::UnknownBucket(address.to_string()))?;
            let plan = BucketPlan::build(dataset, &[attr], mode)?;
            let rule = plan.rule(attr).expect("plan holds the requested attribute");
            let index = rule
                .keys()
                .iter()
                .position(|k| k.to_string() == address.key)
                .ok_or_else(|| Error::UnknownBucket(address.to_string()))?;
            let mut out = BTreeSet::new();
            for key in error_set(dataset, systems[0], mode)? {
                let value = attribute_value(attr, &key.0, dataset, mode.strict_attributes)?;
                if rule.assign(&value) == Some(index) {
                    out.insert(key);
                }
            }
            out
        }
        ErrorSelector::Common => {
            if systems.len() < 2 {
                return Err(Error::NeedTwoOrMoreSystems(systems.len()));
            }
            let mut sets = systems.iter().map(|s| error_set(dataset, s, mode));
            let mut common = sets.next().unwrap()?;
            for set in sets {
                let set = set?;
                common.retain(|k| set.contains(k));
            }
            common
        }
        ErrorSelector::UniqueTo => {
            if systems.len() != 2 {
                return Err(Error::NeedTwoSystems(systems.len()));
            }
            let a = error_set(dataset, systems[0], mode)?;
            let b = error_set(dataset, systems[1], mode)?;
            b.difference(&a).cloned().collect()
        }
    };
    selected
        .into_iter()
        .map(|key| describe(dataset, systems, key, mode))
        .collect()
}

pub fn bucket_errors(system: &SystemOutput, dataset: &Dataset, bucket: &str, mode: EvalMode) -> Result<Vec<ErrorCase>> {
    let address = BucketAddress::parse(bucket)?;
    error_cases(&[system], dataset, &ErrorSelector::Bucket(address), mode)
}

pub fn common_errors(systems: &[&SystemOutput], dataset: &Dataset, mode: EvalMode) -> Result<Vec<ErrorCase>> {
    error_cases(systems, dataset, &ErrorSelector::Common, mode)
}

/// Units `a` predicts correctly and `b` gets wrong.
pub fn unique_errors(a: &SystemOutput, b: &SystemOutput, dataset: &Dataset, mode: EvalMode) -> Result<Vec<ErrorCase>> {
    error_cases(&[a, b], dataset, &ErrorSelector::UniqueTo, mode)
}
