//! Interpretable attributes of evaluation units.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, EvaluationUnit, SamplePayload, TaskKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Attribute {
    /// Entity length in tokens.
    #[serde(rename = "eLen")]
    EntityLength,
    /// Token count of the sentence containing the entity.
    #[serde(rename = "sLen")]
    SentenceLength,
    /// Entity label.
    #[serde(rename = "eLab")]
    EntityLabel,
    /// How often the entity surface occurs as a gold entity in training data.
    #[serde(rename = "eFreq")]
    EntityFrequency,
    /// Token count of the text (classification) or reference (generation).
    #[serde(rename = "tLen")]
    TextLength,
    /// Gold label of a classification sample.
    #[serde(rename = "label")]
    Label,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Continuous,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttributeValue {
    Number(f64),
    Category(String),
}

impl AttributeValue {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            AttributeValue::Number(x) => Some(*x),
            AttributeValue::Category(_) => None,
        }
    }
}

impl Attribute {
    pub const ALL: [Attribute; 6] = [
        Attribute::EntityLength,
        Attribute::SentenceLength,
        Attribute::EntityLabel,
        Attribute::EntityFrequency,
        Attribute::TextLength,
        Attribute::Label,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Attribute::EntityLength => "eLen",
            Attribute::SentenceLength => "sLen",
            Attribute::EntityLabel => "eLab",
            Attribute::EntityFrequency => "eFreq",
            Attribute::TextLength => "tLen",
            Attribute::Label => "label",
        }
    }

    pub fn value_kind(&self) -> ValueKind {
        match self {
            Attribute::EntityLabel | Attribute::Label => ValueKind::Categorical,
            _ => ValueKind::Continuous,
        }
    }

    pub fn applies_to(&self, task: TaskKind) -> bool {
        match task {
            TaskKind::SequenceLabeling => matches!(
                self,
                Attribute::EntityLength
                    | Attribute::SentenceLength
                    | Attribute::EntityLabel
                    | Attribute::EntityFrequency
            ),
            TaskKind::TextClassification => matches!(self, Attribute::TextLength | Attribute::Label),
            TaskKind::ScoredGeneration => matches!(self, Attribute::TextLength),
        }
    }

    pub fn defaults_for(task: TaskKind) -> Vec<Attribute> {
        Attribute::ALL.into_iter().filter(|a| a.applies_to(task)).collect()
    }

    pub fn parse(name: &str, task: TaskKind) -> Result<Attribute> {
        Attribute::ALL
            .into_iter()
            .find(|a| a.name() == name.trim() && a.applies_to(task))
            .ok_or_else(|| Error::UnknownAttribute {
                name: name.to_string(),
                task,
            })
    }

    /// Comma-separated list; empty input selects the task defaults.
    pub fn parse_list(list: &str, task: TaskKind) -> Result<Vec<Attribute>> {
        let mut out = Vec::new();
        for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let attr = Attribute::parse(name, task)?;
            if !out.contains(&attr) {
                out.push(attr);
            }
        }
        if out.is_empty() {
            out = Attribute::defaults_for(task);
        }
        Ok(out)
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Value of `attr` on `unit`. Deterministic and side-effect free.
///
/// `strict` makes eFreq fail without training statistics instead of
/// reporting every entity as unseen.
pub fn attribute_value(
    attr: Attribute,
    unit: &EvaluationUnit,
    dataset: &Dataset,
    strict: bool,
) -> Result<AttributeValue> {
    let unknown = || Error::UnknownAttribute {
        name: attr.name().to_string(),
        task: dataset.task,
    };
    if !attr.applies_to(dataset.task) {
        return Err(unknown());
    }
    let sample = dataset
        .samples
        .get(unit.sample_id())
        .ok_or_else(|| Error::InvalidSample(format!("no sample {}", unit.sample_id())))?;

    match (attr, unit, &sample.payload) {
        (Attribute::EntityLength, EvaluationUnit::Span { span, .. }, _) => {
            Ok(AttributeValue::Number(span.len() as f64))
        }
        (Attribute::SentenceLength, EvaluationUnit::Span { .. }, _) => {
            Ok(AttributeValue::Number(sample.token_count() as f64))
        }
        (Attribute::EntityLabel, EvaluationUnit::Span { span, .. }, _) => {
            Ok(AttributeValue::Category(span.label.clone()))
        }
        (
            Attribute::EntityFrequency,
            EvaluationUnit::Span { span, .. },
            SamplePayload::Sequence { tokens, .. },
        ) => match &dataset.train_stats {
            Some(stats) => {
                let end = span.end.min(tokens.len().saturating_sub(1));
                let surface = tokens[span.start.min(end)..=end].join(" ");
                Ok(AttributeValue::Number(stats.entity_count(&surface) as f64))
            }
            None if strict => Err(Error::MissingTrainStats),
            None => Ok(AttributeValue::Number(0.0)),
        },
        (Attribute::TextLength, EvaluationUnit::Sample { .. }, _) => {
            Ok(AttributeValue::Number(sample.token_count() as f64))
        }
        (
            Attribute::Label,
            EvaluationUnit::Sample { .. },
            SamplePayload::Classification { gold_label, .. },
        ) => Ok(AttributeValue::Category(gold_label.clone())),
        _ => Err(unknown()),
    }
}
