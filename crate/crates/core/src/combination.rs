//! Plurality-vote system combination.
//!
//! Classification votes per sample; sequence labeling votes per token and
//! then repairs the result into valid BIO. Ties go to the label whose voters
//! have the highest mean confidence, then to the earliest member.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analysis::{overall_value, single_analysis_with_plan, AnalysisOptions};
use crate::attributes::Attribute;
use crate::bio::{self, Tag};
use crate::bucketing::BucketPlan;
use crate::error::{Error, Result};
use crate::ingest::{content_id, serialize_system};
use crate::model::{Dataset, Prediction, PredictionPayload, SystemOutput, TaskKind};
use crate::report::AnalysisReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    Unanimous,
    Plurality,
    TieBroken,
}

/// Vote counts of one sample: one map per token for sequences, a single
/// map for classification. `resolution` is the weakest over positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SampleVotes {
    pub sample_id: usize,
    pub votes: Vec<BTreeMap<String, usize>>,
    pub resolution: Resolution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinedSystem {
    pub member_ids: Vec<String>,
    pub output: SystemOutput,
    pub provenance: Vec<SampleVotes>,
}

struct Vote<'a> {
    value: &'a str,
    confidence: Option<f64>,
}

/// Plurality winner among `votes` (in member order) and how it was decided.
fn elect(votes: &[Vote<'_>]) -> (usize, Resolution, BTreeMap<String, usize>) {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for v in votes {
        *counts.entry(v.value.to_string()).or_default() += 1;
    }
    let best = *counts.values().max().expect("at least one vote");
    let tied: Vec<&str> = counts.iter().filter(|(_, &c)| c == best).map(|(k, _)| k.as_str()).collect();
    let winner_value = if tied.len() == 1 {
        tied[0]
    } else {
        let mean_conf = |label: &str| -> Option<f64> {
            let cs: Vec<f64> = votes.iter().filter(|v| v.value == label).map(|v| v.confidence).collect::<Option<_>>()?;
            Some(cs.iter().sum::<f64>() / cs.len() as f64)
        };
        let confs: Option<Vec<f64>> = tied.iter().map(|l| mean_conf(l)).collect();
        let by_confidence = confs.and_then(|cs| {
            let top = cs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let leaders: Vec<&str> = tied.iter().zip(&cs).filter(|(_, &c)| c == top).map(|(l, _)| *l).collect();
            (leaders.len() == 1).then(|| leaders[0])
        });
        by_confidence.unwrap_or_else(|| {
            votes
                .iter()
                .map(|v| v.value)
                .find(|v| tied.contains(v))
                .expect("a tied label has a voter")
        })
    };
    let winner = votes.iter().position(|v| v.value == winner_value).unwrap();
    let resolution = if best == votes.len() {
        Resolution::Unanimous
    } else if tied.len() == 1 {
        Resolution::Plurality
    } else {
        Resolution::TieBroken
    };
    (winner, resolution, counts)
}

/// Combines two or more systems evaluated on `dataset` by plurality vote.
pub fn combine(systems: &[&SystemOutput], dataset: &Dataset) -> Result<CombinedSystem> {
    if systems.len() < 2 {
        return Err(Error::NeedTwoOrMoreSystems(systems.len()));
    }
    if dataset.task == TaskKind::ScoredGeneration {
        return Err(Error::CombinationUnsupportedTask(dataset.task));
    }
    for s in systems {
        s.check_against(dataset)?;
    }
    let mut predictions = Vec::with_capacity(dataset.len());
    let mut provenance = Vec::with_capacity(dataset.len());
    for sample_id in 0..dataset.len() {
        let payloads: Vec<&PredictionPayload> = systems.iter().map(|s| &s.predictions[sample_id].payload).collect();
        let (payload, votes, resolution) = match payloads[0] {
            PredictionPayload::Classification { .. } => {
                let votes: Vec<Vote<'_>> = payloads
                    .iter()
                    .map(|p| match p {
                        PredictionPayload::Classification { label, confidence } => Vote {
                            value: label,
                            confidence: *confidence,
                        },
                        _ => unreachable!(),
                    })
                    .collect();
                let (w, resolution, counts) = elect(&votes);
                let label = votes[w].value.to_string();
                let winners: Option<Vec<f64>> =
                    votes.iter().filter(|v| v.value == label).map(|v| v.confidence).collect();
                let confidence = winners.map(|cs| cs.iter().sum::<f64>() / cs.len() as f64);
                (PredictionPayload::Classification { label, confidence }, vec![counts], resolution)
            }
            PredictionPayload::Sequence { tags } => {
                let strings: Vec<Vec<String>> = payloads
                    .iter()
                    .map(|p| match p {
                        PredictionPayload::Sequence { tags } => tags.iter().map(Tag::to_string).collect(),
                        _ => unreachable!(),
                    })
                    .collect();
                let mut voted = Vec::with_capacity(tags.len());
                let mut all_counts = Vec::with_capacity(tags.len());
                let mut resolution = Resolution::Unanimous;
                for t in 0..tags.len() {
                    let votes: Vec<Vote<'_>> = strings
                        .iter()
                        .map(|s| Vote {
                            value: &s[t],
                            confidence: None,
                        })
                        .collect();
                    let (w, r, counts) = elect(&votes);
                    voted.push(match &payloads[w] {
                        PredictionPayload::Sequence { tags } => tags[t].clone(),
                        _ => unreachable!(),
                    });
                    all_counts.push(counts);
                    resolution = resolution.max(r);
                }
                (
                    PredictionPayload::Sequence {
                        tags: bio::repair(&voted),
                    },
                    all_counts,
                    resolution,
                )
            }
            PredictionPayload::Scored { .. } => return Err(Error::CombinationUnsupportedTask(dataset.task)),
        };
        predictions.push(Prediction { sample_id, payload });
        provenance.push(SampleVotes {
            sample_id,
            votes,
            resolution,
        });
    }
    let mut output = SystemOutput::new("", dataset.task, predictions)?;
    output.id = content_id(serialize_system(dataset, &output).as_bytes());
    Ok(CombinedSystem {
        member_ids: systems.iter().map(|s| s.id.clone()).collect(),
        output,
        provenance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MemberValue {
    pub system_id: String,
    pub value: Option<f64>,
}

/// Report of the combined system alongside each member's overall value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CombinedReport {
    pub combined_id: String,
    pub member_ids: Vec<String>,
    pub members: Vec<MemberValue>,
    pub report: AnalysisReport,
}

pub fn combined_report(
    systems: &[&SystemOutput],
    dataset: &Dataset,
    attributes: &[Attribute],
    options: &AnalysisOptions,
) -> Result<(CombinedSystem, CombinedReport)> {
    let combined = combine(systems, dataset)?;
    let plan = BucketPlan::build(dataset, attributes, options.mode)?;
    let report = single_analysis_with_plan(&combined.output, dataset, &plan, options)?;
    let members = systems
        .iter()
        .map(|s| {
            Ok(MemberValue {
                system_id: s.id.clone(),
                value: overall_value(s, dataset, options.mode)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let out = CombinedReport {
        combined_id: combined.output.id.clone(),
        member_ids: combined.member_ids.clone(),
        members,
        report,
    };
    Ok((combined, out))
}
