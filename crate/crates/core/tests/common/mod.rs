#![allow(dead_code)]

use fineval_core::model::{PredictionPayload, SamplePayload};
use fineval_core::{Dataset, Prediction, Sample, SystemOutput, Tag, TaskKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const LABELS: [&str; 3] = ["PER", "LOC", "ORG"];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Arbitrary (possibly ill-formed) BIO sequence over three labels.
pub fn random_tags(rng: &mut impl Rng, len: usize) -> Vec<Tag> {
    (0..len)
        .map(|_| {
            let label = LABELS[rng.random_range(0..LABELS.len())].to_string();
            match rng.random_range(0..5) {
                0 | 1 => Tag::Outside,
                2 | 3 => Tag::Begin(label),
                _ => Tag::Inside(label),
            }
        })
        .collect()
}

/// Copy of `tags` with each position replaced at random with probability `p`.
pub fn perturb(rng: &mut impl Rng, tags: &[Tag], p: f64) -> Vec<Tag> {
    tags.iter()
        .map(|t| if rng.random_bool(p) { random_tags(rng, 1).remove(0) } else { t.clone() })
        .collect()
}

pub fn ner_dataset(id: &str, sentences: Vec<Vec<Tag>>) -> Dataset {
    let samples = sentences
        .into_iter()
        .enumerate()
        .map(|(i, tags)| Sample {
            id: i,
            payload: SamplePayload::Sequence {
                tokens: (0..tags.len()).map(|j| format!("w{}", (i * 7 + j) % 13)).collect(),
                gold_tags: tags,
            },
        })
        .collect();
    Dataset::new(id, TaskKind::SequenceLabeling, samples).unwrap()
}

pub fn ner_system(id: &str, preds: Vec<Vec<Tag>>) -> SystemOutput {
    let predictions = preds
        .into_iter()
        .enumerate()
        .map(|(i, tags)| Prediction {
            sample_id: i,
            payload: PredictionPayload::Sequence { tags },
        })
        .collect();
    SystemOutput::new(id, TaskKind::SequenceLabeling, predictions).unwrap()
}

pub fn gold_tags(ds: &Dataset) -> Vec<Vec<Tag>> {
    ds.samples
        .iter()
        .map(|s| match &s.payload {
            SamplePayload::Sequence { gold_tags, .. } => gold_tags.clone(),
            _ => unreachable!(),
        })
        .collect()
}

/// Random NER dataset plus `systems` noisy outputs.
pub fn random_ner(seed: u64, sentences: usize, max_len: usize, systems: usize) -> (Dataset, Vec<SystemOutput>) {
    let mut r = rng(seed);
    let gold: Vec<Vec<Tag>> = (0..sentences)
        .map(|_| {
            let len = r.random_range(1..=max_len);
            random_tags(&mut r, len)
        })
        .collect();
    let outputs = (0..systems)
        .map(|k| {
            let p = r.random_range(0.0..0.5);
            ner_system(&format!("s{k}"), gold.iter().map(|g| perturb(&mut r, g, p)).collect())
        })
        .collect();
    (ner_dataset("ner", gold), outputs)
}

pub fn cls_dataset(id: &str, texts: &[String], gold: &[String]) -> Dataset {
    let samples = texts
        .iter()
        .zip(gold)
        .enumerate()
        .map(|(i, (t, g))| Sample {
            id: i,
            payload: SamplePayload::Classification {
                text: t.clone(),
                gold_label: g.clone(),
            },
        })
        .collect();
    Dataset::new(id, TaskKind::TextClassification, samples).unwrap()
}

pub fn cls_system(id: &str, labels: &[String], confidences: Option<&[f64]>) -> SystemOutput {
    let predictions = labels
        .iter()
        .enumerate()
        .map(|(i, l)| Prediction {
            sample_id: i,
            payload: PredictionPayload::Classification {
                label: l.clone(),
                confidence: confidences.map(|c| c[i]),
            },
        })
        .collect();
    SystemOutput::new(id, TaskKind::TextClassification, predictions).unwrap()
}

pub fn cls_labels(s: &SystemOutput) -> Vec<String> {
    s.predictions
        .iter()
        .map(|p| match &p.payload {
            PredictionPayload::Classification { label, .. } => label.clone(),
            _ => unreachable!(),
        })
        .collect()
}

/// Random classification dataset plus `systems` outputs over labels a..e.
pub fn random_cls(seed: u64, n: usize, systems: usize) -> (Dataset, Vec<SystemOutput>) {
    let mut r = rng(seed);
    let labels = ["a", "b", "c", "d", "e"];
    let texts: Vec<String> = (0..n)
        .map(|i| vec!["tok"; r.random_range(1..=30)].join(" ") + &format!(" {i}"))
        .collect();
    let gold: Vec<String> = (0..n).map(|_| labels[r.random_range(0..labels.len())].to_string()).collect();
    let outputs = (0..systems)
        .map(|k| {
            let acc = r.random_range(0.3..1.0);
            let preds: Vec<String> = gold
                .iter()
                .map(|g| if r.random_bool(acc) { g.clone() } else { labels[r.random_range(0..labels.len())].to_string() })
                .collect();
            cls_system(&format!("c{k}"), &preds, None)
        })
        .collect();
    (cls_dataset("cls", &texts, &gold), outputs)
}
