//! Bootstrap confidence intervals and calibration analysis.
//!
//! Intervals are percentile bootstrap intervals over whole samples
//! (sentences for sequence labeling), so span-level replicates keep
//! within-sentence correlation. Replicate `r` draws from a ChaCha8 stream
//! seeded with `seed + r`, which keeps parallel runs deterministic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricTally;
use crate::model::{Dataset, PredictionPayload, SamplePayload, SystemOutput, TaskKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleUnit {
    #[default]
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub confidence_level: f64,
    pub seed: u64,
    pub resample_unit: ResampleUnit,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            replicates: 1000,
            confidence_level: 0.95,
            seed: 0,
            resample_unit: ResampleUnit::Sample,
        }
    }
}

impl BootstrapConfig {
    pub fn new(replicates: usize, confidence_level: f64, seed: u64) -> Result<Self> {
        let config = BootstrapConfig {
            replicates,
            confidence_level,
            seed,
            resample_unit: ResampleUnit::Sample,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates < 1 {
            return Err(Error::InvalidBootstrapConfig("replicates must be >= 1".into()));
        }
        if !(self.confidence_level > 0.0 && self.confidence_level < 1.0) {
            return Err(Error::InvalidBootstrapConfig(format!(
                "confidence level {} is not in (0, 1)",
                self.confidence_level
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.high - self.low
    }

    pub fn contains(&self, x: f64) -> bool {
        self.low <= x && x <= self.high
    }
}

/// Linear interpolation between order statistics of an ascending slice.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Sorted metric values of `config.replicates` bootstrap replicates.
pub fn bootstrap_distribution(per_sample: &[MetricTally], config: &BootstrapConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let first = per_sample.first().ok_or(Error::NoData)?;
    let kind = first.kind();
    let n = per_sample.len();
    let mut values: Vec<f64> = (0..config.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(r as u64));
            let mut acc = MetricTally::zero(kind);
            for _ in 0..n {
                acc += per_sample[rng.random_range(0..n)];
            }
            acc.score()
        })
        .collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Percentile bootstrap interval of the metric over per-sample tallies.
pub fn bootstrap_ci(per_sample: &[MetricTally], config: &BootstrapConfig) -> Result<Interval> {
    let dist = bootstrap_distribution(per_sample, config)?;
    let alpha = 1.0 - config.confidence_level;
    Ok(Interval {
        low: percentile(&dist, alpha / 2.0),
        high: percentile(&dist, 1.0 - alpha / 2.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CalibrationBin {
    pub low: f64,
    pub high: f64,
    pub mean_confidence: Option<f64>,
    pub accuracy: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CalibrationReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset_id: Option<String>,
    pub bins: Vec<CalibrationBin>,
    pub ece: f64,
    pub confidence_histogram: Vec<usize>,
    pub n: usize,
}

/// Bin of `confidence` among `bins` equal-width, right-closed bins over
/// [0, 1]; the first bin also holds 0.
pub fn bin_index(confidence: f64, bins: usize) -> usize {
    let edge = |i: usize| i as f64 / bins as f64;
    let mut idx = ((confidence * bins as f64).ceil() as usize).saturating_sub(1).min(bins - 1);
    while idx > 0 && confidence <= edge(idx) {
        idx -= 1;
    }
    while idx < bins - 1 && confidence > edge(idx + 1) {
        idx += 1;
    }
    idx
}

/// Neumaier summation, so sums such as ten copies of 0.8 land on 8.0.
#[derive(Debug, Clone, Copy, Default)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Calibration over `(confidence, correct)` pairs.
pub fn calibration_from_outcomes(outcomes: &[(f64, bool)], bins: usize) -> Result<CalibrationReport> {
    if bins == 0 {
        return Err(Error::InvalidBinCount);
    }
    let mut counts = vec![0usize; bins];
    let mut conf_sum = vec![CompensatedSum::default(); bins];
    let mut correct = vec![0usize; bins];
    for &(c, ok) in outcomes {
        let b = bin_index(c, bins);
        counts[b] += 1;
        conf_sum[b].add(c);
        correct[b] += ok as usize;
    }
    let total = outcomes.len();
    // Sum of per-bin |confidence mass - correct count|, divided once by N.
    let mut gap = CompensatedSum::default();
    let bins_out = (0..bins)
        .map(|b| {
            let n = counts[b];
            let (mean_confidence, accuracy) = if n == 0 {
                (None, None)
            } else {
                let mass = conf_sum[b].value();
                gap.add((mass - correct[b] as f64).abs());
                (Some(mass / n as f64), Some(correct[b] as f64 / n as f64))
            };
            CalibrationBin {
                low: b as f64 / bins as f64,
                high: (b + 1) as f64 / bins as f64,
                mean_confidence,
                accuracy,
                n,
            }
        })
        .collect();
    let ece = if total == 0 { 0.0 } else { gap.value() / total as f64 };
    Ok(CalibrationReport {
        system_id: None,
        dataset_id: None,
        bins: bins_out,
        ece,
        confidence_histogram: counts,
        n: total,
    })
}

pub fn calibration(dataset: &Dataset, system: &SystemOutput, bins: usize) -> Result<CalibrationReport> {
    if dataset.task != TaskKind::TextClassification {
        return Err(Error::CalibrationUnsupportedTask(dataset.task));
    }
    system.check_against(dataset)?;
    let mut outcomes = Vec::with_capacity(dataset.len());
    for (sample, pred) in dataset.samples.iter().zip(&system.predictions) {
        if let (
            SamplePayload::Classification { gold_label, .. },
            PredictionPayload::Classification { label, confidence },
        ) = (&sample.payload, &pred.payload)
        {
            let c = confidence.ok_or(Error::MissingConfidences)?;
            outcomes.push((c, label == gold_label));
        }
    }
    let mut report = calibration_from_outcomes(&outcomes, bins)?;
    report.system_id = Some(system.id.clone());
    report.dataset_id = Some(dataset.id.clone());
    Ok(report)
}
