//! Task-agnostic data model: samples, predictions, datasets and evaluation units.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bio::{self, BioMode, Span, Tag};
use crate::error::{Error, Result};
use crate::ingest::TrainStats;
use crate::metrics::MetricKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    TextClassification,
    SequenceLabeling,
    ScoredGeneration,
}

impl TaskKind {
    pub const ALL: [TaskKind; 3] = [
        TaskKind::TextClassification,
        TaskKind::SequenceLabeling,
        TaskKind::ScoredGeneration,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TaskKind::TextClassification => "text_classification",
            TaskKind::SequenceLabeling => "sequence_labeling",
            TaskKind::ScoredGeneration => "scored_generation",
        }
    }

    pub fn metric(&self) -> MetricKind {
        match self {
            TaskKind::TextClassification => MetricKind::Accuracy,
            TaskKind::SequenceLabeling => MetricKind::SpanF1,
            TaskKind::ScoredGeneration => MetricKind::MeanScore,
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = String;

    /// Accepts the canonical names plus the usual short task names
    /// (`ner`, `pos`, `chunk`, `classification`, `summarization`, ...).
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        match norm.as_str() {
            "text_classification" | "classification" | "tc" | "sentiment" | "topic" => {
                Ok(TaskKind::TextClassification)
            }
            "sequence_labeling" | "ner" | "pos" | "chunk" | "chunking" | "seq" => {
                Ok(TaskKind::SequenceLabeling)
            }
            "scored_generation" | "generation" | "summarization" | "translation" | "scores" => {
                Ok(TaskKind::ScoredGeneration)
            }
            _ => Err(format!("unknown task {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", rename_all_fields = "camelCase")]
pub enum SamplePayload {
    Classification {
        text: String,
        gold_label: String,
    },
    Sequence {
        tokens: Vec<String>,
        gold_tags: Vec<Tag>,
    },
    Scored {
        source_id: String,
        reference: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: usize,
    pub payload: SamplePayload,
}

impl Sample {
    pub fn task(&self) -> TaskKind {
        match self.payload {
            SamplePayload::Classification { .. } => TaskKind::TextClassification,
            SamplePayload::Sequence { .. } => TaskKind::SequenceLabeling,
            SamplePayload::Scored { .. } => TaskKind::ScoredGeneration,
        }
    }

    /// Whitespace tokens of the text (classification), the sentence tokens
    /// (sequence labeling) or the reference (generation).
    pub fn token_count(&self) -> usize {
        match &self.payload {
            SamplePayload::Classification { text, .. } => text.split_whitespace().count(),
            SamplePayload::Sequence { tokens, .. } => tokens.len(),
            SamplePayload::Scored { reference, .. } => reference
                .as_deref()
                .map_or(0, |r| r.split_whitespace().count()),
        }
    }

    pub fn tokens(&self) -> Option<&[String]> {
        match &self.payload {
            SamplePayload::Sequence { tokens, .. } => Some(tokens),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", rename_all_fields = "camelCase")]
pub enum PredictionPayload {
    Classification {
        label: String,
        confidence: Option<f64>,
    },
    Sequence {
        tags: Vec<Tag>,
    },
    Scored {
        score: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub sample_id: usize,
    pub payload: PredictionPayload,
}

impl Prediction {
    pub fn task(&self) -> TaskKind {
        match self.payload {
            PredictionPayload::Classification { .. } => TaskKind::TextClassification,
            PredictionPayload::Sequence { .. } => TaskKind::SequenceLabeling,
            PredictionPayload::Scored { .. } => TaskKind::ScoredGeneration,
        }
    }

    pub fn confidence(&self) -> Option<f64> {
        match self.payload {
            PredictionPayload::Classification { confidence, .. } => confidence,
            _ => None,
        }
    }
}

/// A named test set. Sample ids are dense `0..N` in order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub id: String,
    pub task: TaskKind,
    pub samples: Vec<Sample>,
    pub train_stats: Option<TrainStats>,
}

impl Dataset {
    pub fn new(id: impl Into<String>, task: TaskKind, samples: Vec<Sample>) -> Result<Self> {
        for (i, sample) in samples.iter().enumerate() {
            if sample.id != i {
                return Err(Error::InvalidSample(format!(
                    "sample at position {i} has id {}",
                    sample.id
                )));
            }
            if sample.task() != task {
                return Err(Error::TaskMismatch {
                    expected: task,
                    found: sample.task(),
                });
            }
            if let SamplePayload::Sequence { tokens, gold_tags } = &sample.payload {
                if tokens.len() != gold_tags.len() {
                    return Err(Error::InvalidSample(format!(
                        "sample {i}: {} tokens but {} tags",
                        tokens.len(),
                        gold_tags.len()
                    )));
                }
            }
        }
        Ok(Dataset {
            id: id.into(),
            task,
            samples,
            train_stats: None,
        })
    }

    pub fn with_train_stats(mut self, stats: TrainStats) -> Self {
        self.train_stats = Some(stats);
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Gold evaluation units: one per sample, or one per gold entity span
    /// for sequence labeling.
    pub fn gold_units(&self, mode: BioMode) -> Result<Vec<EvaluationUnit>> {
        let mut units = Vec::new();
        for sample in &self.samples {
            match &sample.payload {
                SamplePayload::Sequence { gold_tags, .. } => {
                    for span in bio::extract_spans_with(gold_tags, mode)? {
                        units.push(EvaluationUnit::Span {
                            sample_id: sample.id,
                            span,
                        });
                    }
                }
                _ => units.push(EvaluationUnit::Sample {
                    sample_id: sample.id,
                }),
            }
        }
        Ok(units)
    }
}

/// One system's predictions, one per dataset sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemOutput {
    pub id: String,
    pub task: TaskKind,
    pub predictions: Vec<Prediction>,
}

impl SystemOutput {
    pub fn new(id: impl Into<String>, task: TaskKind, predictions: Vec<Prediction>) -> Result<Self> {
        let mut with_conf = 0usize;
        for (i, p) in predictions.iter().enumerate() {
            if p.sample_id != i {
                return Err(Error::InvalidPrediction(format!(
                    "prediction at position {i} refers to sample {}",
                    p.sample_id
                )));
            }
            if p.task() != task {
                return Err(Error::TaskMismatch {
                    expected: task,
                    found: p.task(),
                });
            }
            match p.payload {
                PredictionPayload::Classification {
                    confidence: Some(c),
                    ..
                } => {
                    if !(0.0..=1.0).contains(&c) {
                        return Err(Error::InvalidPrediction(format!(
                            "prediction {i}: confidence {c} outside [0, 1]"
                        )));
                    }
                    with_conf += 1;
                }
                PredictionPayload::Scored { score } if !score.is_finite() => {
                    return Err(Error::InvalidPrediction(format!(
                        "prediction {i}: score is not finite"
                    )));
                }
                _ => {}
            }
        }
        if with_conf != 0 && with_conf != predictions.len() {
            return Err(Error::InvalidPrediction(
                "confidence must be given on all predictions or none".into(),
            ));
        }
        Ok(SystemOutput {
            id: id.into(),
            task,
            predictions,
        })
    }

    pub fn has_confidences(&self) -> bool {
        self.predictions.first().and_then(Prediction::confidence).is_some()
    }

    /// Checks that these predictions line up with `dataset` sample by sample.
    pub fn check_against(&self, dataset: &Dataset) -> Result<()> {
        if self.task != dataset.task {
            return Err(Error::TaskMismatch {
                expected: dataset.task,
                found: self.task,
            });
        }
        if self.predictions.len() != dataset.len() {
            return Err(Error::SampleCountMismatch {
                expected: dataset.len(),
                found: self.predictions.len(),
            });
        }
        for (sample, pred) in dataset.samples.iter().zip(&self.predictions) {
            if let (SamplePayload::Sequence { tokens, .. }, PredictionPayload::Sequence { tags }) = (&sample.payload, &pred.payload) {
                if tokens.len() != tags.len() {
                    return Err(Error::SampleMismatch {
                        sample_id: sample.id,
                        reason: format!("{} tokens but {} predicted tags", tokens.len(), tags.len()),
                    });
                }
            }
        }
        Ok(())
    }
}

/// How strictly units are derived: BIO repair mode and whether eFreq may
/// fall back to "unseen" without training statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvalMode {
    pub bio_mode: BioMode,
    pub strict_attributes: bool,
}

/// The thing being scored: a whole sample, or an entity span in a sentence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", rename_all_fields = "camelCase")]
pub enum EvaluationUnit {
    Sample { sample_id: usize },
    Span { sample_id: usize, span: Span },
}

impl EvaluationUnit {
    pub fn sample_id(&self) -> usize {
        match self {
            EvaluationUnit::Sample { sample_id } | EvaluationUnit::Span { sample_id, .. } => {
                *sample_id
            }
        }
    }

    pub fn span(&self) -> Option<&Span> {
        match self {
            EvaluationUnit::Span { span, .. } => Some(span),
            EvaluationUnit::Sample { .. } => None,
        }
    }
}
