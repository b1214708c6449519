//! Partitioning evaluation units into buckets by attribute value.
//!
//! A [`BucketingRule`] is derived from gold data only, so every system
//! evaluated on the same dataset sees identical bucket boundaries.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::attributes::{attribute_value, Attribute, AttributeValue, ValueKind};
use crate::error::{Error, Result};
use crate::model::{Dataset, EvalMode, EvaluationUnit};

/// Entity length buckets {1}, {2}, {3}, {>=4}.
pub const ENTITY_LENGTH_THRESHOLDS: [f64; 3] = [1.0, 2.0, 3.0];
/// Train frequency buckets {0}, {1-2}, {3-5}, {>=6}.
pub const ENTITY_FREQUENCY_THRESHOLDS: [f64; 3] = [0.0, 2.0, 5.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BucketingRule {
    /// One bucket per category, in report order (descending gold count,
    /// ties lexicographic).
    Categorical { categories: Vec<String> },
    /// Strictly increasing thresholds `t1 < ... < tk` giving the intervals
    /// `(-inf, t1], (t1, t2], ..., (tk, +inf)`.
    Continuous { thresholds: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum BucketKey {
    Interval { low: f64, high: f64 },
    Category(String),
}

fn fmt_bound(x: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if x == f64::INFINITY {
        f.write_str("+inf")
    } else if x == f64::NEG_INFINITY {
        f.write_str("-inf")
    } else {
        write!(f, "{x}")
    }
}

impl fmt::Display for BucketKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BucketKey::Category(c) => f.write_str(c),
            BucketKey::Interval { low, high } => {
                f.write_str("(")?;
                fmt_bound(*low, f)?;
                f.write_str(",")?;
                fmt_bound(*high, f)?;
                f.write_str(if high.is_infinite() { ")" } else { "]" })
            }
        }
    }
}

impl Serialize for BucketKey {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl BucketKey {
    pub fn contains(&self, value: &AttributeValue) -> bool {
        match (self, value) {
            (BucketKey::Interval { low, high }, AttributeValue::Number(x)) => low < x && x <= high,
            (BucketKey::Category(c), AttributeValue::Category(v)) => c == v,
            _ => false,
        }
    }
}

impl BucketingRule {
    pub fn continuous(thresholds: Vec<f64>) -> Result<Self> {
        if thresholds.iter().any(|t| !t.is_finite()) || thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSample(format!(
                "bucket thresholds must be finite and strictly increasing: {thresholds:?}"
            )));
        }
        Ok(BucketingRule::Continuous { thresholds })
    }

    /// Categories ordered by descending count, ties lexicographic.
    pub fn categorical_from_values<'a>(values: impl IntoIterator<Item = &'a str>) -> Self {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for v in values {
            *counts.entry(v).or_insert(0) += 1;
        }
        let mut cats: Vec<(&str, usize)> = counts.into_iter().collect();
        cats.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        BucketingRule::Categorical {
            categories: cats.into_iter().map(|(c, _)| c.to_string()).collect(),
        }
    }

    /// Quartile boundaries (nearest-rank) of `values`. Boundaries equal to
    /// the maximum are dropped so the top bucket is never empty.
    pub fn quartiles(values: &[f64]) -> Self {
        let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        sorted.sort_by(f64::total_cmp);
        let mut thresholds: Vec<f64> = Vec::new();
        if let Some(&max) = sorted.last() {
            let n = sorted.len();
            for p in [0.25, 0.5, 0.75] {
                let rank = ((p * n as f64).ceil() as usize).clamp(1, n);
                let q = sorted[rank - 1];
                if q < max && thresholds.last().is_none_or(|&t| q > t) {
                    thresholds.push(q);
                }
            }
        }
        BucketingRule::Continuous { thresholds }
    }

    pub fn len(&self) -> usize {
        match self {
            BucketingRule::Categorical { categories } => categories.len(),
            BucketingRule::Continuous { thresholds } => thresholds.len() + 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn keys(&self) -> Vec<BucketKey> {
        match self {
            BucketingRule::Categorical { categories } => {
                categories.iter().cloned().map(BucketKey::Category).collect()
            }
            BucketingRule::Continuous { thresholds } => {
                let mut bounds = Vec::with_capacity(thresholds.len() + 2);
                bounds.push(f64::NEG_INFINITY);
                bounds.extend_from_slice(thresholds);
                bounds.push(f64::INFINITY);
                bounds
                    .windows(2)
                    .map(|w| BucketKey::Interval {
                        low: w[0],
                        high: w[1],
                    })
                    .collect()
            }
        }
    }

    /// Index of the bucket holding `value`. Continuous rules cover the whole
    /// real line; a category absent from gold data has no bucket.
    pub fn assign(&self, value: &AttributeValue) -> Option<usize> {
        match (self, value) {
            (BucketingRule::Continuous { thresholds }, AttributeValue::Number(x)) => {
                Some(thresholds.partition_point(|t| t < x))
            }
            (BucketingRule::Categorical { categories }, AttributeValue::Category(c)) => {
                categories.iter().position(|k| k == c)
            }
            _ => None,
        }
    }

    /// Default rule for `attr` given its values over the gold units.
    pub fn default_for(attr: Attribute, gold_values: &[AttributeValue]) -> Self {
        match attr {
            Attribute::EntityLength => BucketingRule::Continuous {
                thresholds: ENTITY_LENGTH_THRESHOLDS.to_vec(),
            },
            Attribute::EntityFrequency => BucketingRule::Continuous {
                thresholds: ENTITY_FREQUENCY_THRESHOLDS.to_vec(),
            },
            _ => match attr.value_kind() {
                ValueKind::Continuous => {
                    let nums: Vec<f64> = gold_values.iter().filter_map(AttributeValue::as_number).collect();
                    BucketingRule::quartiles(&nums)
                }
                ValueKind::Categorical => BucketingRule::categorical_from_values(
                    gold_values.iter().filter_map(|v| match v {
                        AttributeValue::Category(c) => Some(c.as_str()),
                        AttributeValue::Number(_) => None,
                    }),
                ),
            },
        }
    }
}

/// One cell of an attribute's partition of the gold units.
#[derive(Debug, Clone, PartialEq)]
pub struct Bucket {
    pub attribute: Attribute,
    pub key: BucketKey,
    pub units: Vec<EvaluationUnit>,
    pub n: usize,
}

/// Bucketing rules for a set of attributes over one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct BucketPlan {
    pub entries: Vec<(Attribute, BucketingRule)>,
    pub mode: EvalMode,
}

impl BucketPlan {
    pub fn build(dataset: &Dataset, attributes: &[Attribute], mode: EvalMode) -> Result<Self> {
        let units = dataset.gold_units(mode.bio_mode)?;
        let mut entries = Vec::with_capacity(attributes.len());
        for &attr in attributes {
            if !attr.applies_to(dataset.task) {
                return Err(Error::UnknownAttribute {
                    name: attr.name().to_string(),
                    task: dataset.task,
                });
            }
            let values = units
                .iter()
                .map(|u| attribute_value(attr, u, dataset, mode.strict_attributes))
                .collect::<Result<Vec<_>>>()?;
            entries.push((attr, BucketingRule::default_for(attr, &values)));
        }
        Ok(BucketPlan { entries, mode })
    }

    pub fn rule(&self, attr: Attribute) -> Option<&BucketingRule> {
        self.entries.iter().find(|(a, _)| *a == attr).map(|(_, r)| r)
    }

    pub fn attributes(&self) -> impl Iterator<Item = Attribute> + '_ {
        self.entries.iter().map(|(a, _)| *a)
    }
}

/// Splits the gold units of `dataset` into the buckets of `rule`.
pub fn partition(
    dataset: &Dataset,
    attr: Attribute,
    rule: &BucketingRule,
    mode: EvalMode,
) -> Result<Vec<Bucket>> {
    let mut buckets: Vec<Bucket> = rule
        .keys()
        .into_iter()
        .map(|key| Bucket {
            attribute: attr,
            key,
            units: Vec::new(),
            n: 0,
        })
        .collect();
    for unit in dataset.gold_units(mode.bio_mode)? {
        let value = attribute_value(attr, &unit, dataset, mode.strict_attributes)?;
        if let Some(b) = rule.assign(&value) {
            buckets[b].units.push(unit);
            buckets[b].n += 1;
        }
    }
    Ok(buckets)
}

/// API address of a bucket: `attribute|key`, e.g. `eLen|(3,+inf)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BucketAddress {
    pub attribute: String,
    pub key: String,
}

impl BucketAddress {
    pub fn parse(s: &str) -> Result<Self> {
        match s.split_once('|') {
            Some((a, k)) if !a.is_empty() && !k.is_empty() => Ok(BucketAddress {
                attribute: a.to_string(),
                key: k.to_string(),
            }),
            _ => Err(Error::UnknownBucket(s.to_string())),
        }
    }

    pub fn new(attr: Attribute, key: &BucketKey) -> Self {
        BucketAddress {
            attribute: attr.name().to_string(),
            key: key.to_string(),
        }
    }
}

impl fmt::Display for BucketAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}|{}", self.attribute, self.key)
    }
}
