//! Accuracy, exact-match span F1 and mean score, computed from additive tallies.
//!
//! All averaging is micro: a bucket's value comes from its summed tally.

use std::collections::HashSet;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::bio::Span;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Accuracy,
    SpanF1,
    MeanScore,
}

impl MetricKind {
    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::Accuracy => "accuracy",
            MetricKind::SpanF1 => "span_f1",
            MetricKind::MeanScore => "mean_score",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricTally {
    Accuracy {
        correct: u64,
        total: u64,
    },
    SpanF1 {
        tp: u64,
        fp: u64,
        #[serde(rename = "fn")]
        fn_: u64,
    },
    MeanScore {
        sum: f64,
        n: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecallF1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1 with 0 for every degenerate denominator.
pub fn prf(tp: u64, fp: u64, fn_: u64) -> PrecisionRecallF1 {
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    PrecisionRecallF1 {
        precision,
        recall,
        f1,
    }
}

impl MetricTally {
    pub fn zero(kind: MetricKind) -> Self {
        match kind {
            MetricKind::Accuracy => MetricTally::Accuracy { correct: 0, total: 0 },
            MetricKind::SpanF1 => MetricTally::SpanF1 { tp: 0, fp: 0, fn_: 0 },
            MetricKind::MeanScore => MetricTally::MeanScore { sum: 0.0, n: 0 },
        }
    }

    pub fn kind(&self) -> MetricKind {
        match self {
            MetricTally::Accuracy { .. } => MetricKind::Accuracy,
            MetricTally::SpanF1 { .. } => MetricKind::SpanF1,
            MetricTally::MeanScore { .. } => MetricKind::MeanScore,
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            MetricTally::Accuracy { correct, total } => correct == 0 && total == 0,
            MetricTally::SpanF1 { tp, fp, fn_ } => tp == 0 && fp == 0 && fn_ == 0,
            MetricTally::MeanScore { sum, n } => sum == 0.0 && n == 0,
        }
    }

    /// Metric value with degenerate denominators mapped to 0.
    pub fn score(&self) -> f64 {
        match *self {
            MetricTally::Accuracy { correct, total } => {
                if total == 0 {
                    0.0
                } else {
                    correct as f64 / total as f64
                }
            }
            MetricTally::SpanF1 { tp, fp, fn_ } => prf(tp, fp, fn_).f1,
            MetricTally::MeanScore { sum, n } => {
                if n == 0 {
                    0.0
                } else {
                    sum / n as f64
                }
            }
        }
    }
}

impl AddAssign for MetricTally {
    fn add_assign(&mut self, rhs: Self) {
        match (self, rhs) {
            (
                MetricTally::Accuracy { correct, total },
                MetricTally::Accuracy {
                    correct: c,
                    total: t,
                },
            ) => {
                *correct += c;
                *total += t;
            }
            (
                MetricTally::SpanF1 { tp, fp, fn_ },
                MetricTally::SpanF1 {
                    tp: a,
                    fp: b,
                    fn_: c,
                },
            ) => {
                *tp += a;
                *fp += b;
                *fn_ += c;
            }
            (MetricTally::MeanScore { sum, n }, MetricTally::MeanScore { sum: s, n: m }) => {
                *sum += s;
                *n += m;
            }
            (lhs, rhs) => panic!("cannot merge {:?} tally into {:?}", rhs.kind(), lhs.kind()),
        }
    }
}

impl Add for MetricTally {
    type Output = MetricTally;

    fn add(mut self, rhs: Self) -> Self::Output {
        self += rhs;
        self
    }
}

/// Exact (start, end, label) matching between gold and predicted spans.
pub fn span_f1(gold: &[Span], pred: &[Span]) -> (MetricTally, PrecisionRecallF1) {
    let gold_set: HashSet<&Span> = gold.iter().collect();
    let pred_set: HashSet<&Span> = pred.iter().collect();
    let tp = gold_set.intersection(&pred_set).count() as u64;
    let fp = pred_set.len() as u64 - tp;
    let fn_ = gold_set.len() as u64 - tp;
    (MetricTally::SpanF1 { tp, fp, fn_ }, prf(tp, fp, fn_))
}

/// Per-bucket values plus the overall value of the summed tally.
///
/// A bucket with `n == 0` evaluation units has no value (`None`), never NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct BucketValues {
    pub values: Vec<Option<f64>>,
    pub overall: MetricTally,
    pub overall_value: Option<f64>,
}

pub fn bucket_metric(kind: MetricKind, buckets: &[(MetricTally, usize)]) -> BucketValues {
    let mut overall = MetricTally::zero(kind);
    let mut total_n = 0usize;
    let values = buckets
        .iter()
        .map(|(tally, n)| {
            overall += *tally;
            total_n += n;
            (*n > 0).then(|| tally.score())
        })
        .collect();
    BucketValues {
        values,
        overall,
        overall_value: (total_n > 0).then(|| overall.score()),
    }
}
