//! Parsing, validation and canonical serialization of dataset and
//! system-output files.
//!
//! Three line-oriented UTF-8 formats are supported:
//!
//! * classification TSV: `text \t gold \t pred [\t confidence]`, `#` lines are comments
//! * CoNLL columns: whitespace-separated `token gold pred`, blank line between sentences
//! * score TSV: `sourceId \t score`
//!
//! Tab is the only TSV separator, so text fields cannot contain tabs.
//! `\r\n` line endings and a leading byte-order mark are accepted and
//! normalized away before parsing and hashing.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bio::{self, Tag};
use crate::error::{Error, IngestError, Result};
use crate::model::{
    Dataset, Prediction, PredictionPayload, Sample, SamplePayload, SystemOutput, TaskKind,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileFormatKind {
    ClassificationTsv,
    ConllColumn,
    ScoreTsv,
}

impl FileFormatKind {
    pub fn for_task(task: TaskKind) -> Self {
        match task {
            TaskKind::TextClassification => FileFormatKind::ClassificationTsv,
            TaskKind::SequenceLabeling => FileFormatKind::ConllColumn,
            TaskKind::ScoredGeneration => FileFormatKind::ScoreTsv,
        }
    }

    pub fn extension(&self) -> &'static str {
        match self {
            FileFormatKind::ClassificationTsv | FileFormatKind::ScoreTsv => "tsv",
            FileFormatKind::ConllColumn => "conll",
        }
    }
}

/// Zero-based column positions in a CoNLL file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConllColumns {
    pub token: usize,
    pub gold: usize,
    pub pred: usize,
}

impl Default for ConllColumns {
    fn default() -> Self {
        ConllColumns {
            token: 0,
            gold: 1,
            pred: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSource {
    pub path: String,
    pub hash: String,
}

/// Training-set statistics backing the eFreq attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub entity_surface_counts: BTreeMap<String, u64>,
    pub token_counts: BTreeMap<String, u64>,
    pub source: TrainSource,
}

impl TrainStats {
    pub fn entity_count(&self, surface: &str) -> u64 {
        self.entity_surface_counts.get(surface).copied().unwrap_or(0)
    }
}

/// Parsed file: aligned samples and predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub samples: Vec<Sample>,
    pub predictions: Vec<Prediction>,
    /// Zero-token sentences skipped while reading CoNLL input.
    pub empty_sentences_dropped: usize,
}

/// Bytes as hashed and stored: BOM stripped, `\r\n` folded to `\n`.
pub fn canonical_bytes(bytes: &[u8]) -> Vec<u8> {
    let body = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    let mut out = Vec::with_capacity(body.len());
    let mut i = 0;
    while i < body.len() {
        if body[i] == b'\r' && body.get(i + 1) == Some(&b'\n') {
            i += 1;
            continue;
        }
        out.push(body[i]);
        i += 1;
    }
    out
}

/// Hex SHA-256 of the canonicalized bytes.
pub fn content_id(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(canonical_bytes(bytes)))
}

fn decode(bytes: &[u8]) -> Result<String, IngestError> {
    let canon = canonical_bytes(bytes);
    String::from_utf8(canon).map_err(|e| IngestError::InvalidUtf8 {
        offset: e.utf8_error().valid_up_to(),
    })
}

fn tsv_records(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_confidence(line: usize, raw: &str) -> Result<f64, IngestError> {
    match raw.trim().parse::<f64>() {
        Ok(c) if (0.0..=1.0).contains(&c) => Ok(c),
        _ => Err(IngestError::BadConfidence {
            line,
            value: raw.to_string(),
        }),
    }
}

pub fn parse_classification_tsv(bytes: &[u8]) -> Result<Parsed, IngestError> {
    let text = decode(bytes)?;
    let mut samples = Vec::new();
    let mut predictions = Vec::new();
    let mut with_conf: Option<bool> = None;
    for (line, record) in tsv_records(&text) {
        let cols: Vec<&str> = record.split('\t').collect();
        if !(3..=4).contains(&cols.len()) {
            return Err(IngestError::BadColumnCount {
                line,
                expected: "3 or 4",
                found: cols.len(),
            });
        }
        let confidence = match cols.get(3) {
            Some(raw) => Some(parse_confidence(line, raw)?),
            None => None,
        };
        match with_conf {
            None => with_conf = Some(confidence.is_some()),
            Some(prev) if prev != confidence.is_some() => {
                return Err(IngestError::MixedConfidence { line })
            }
            _ => {}
        }
        let id = samples.len();
        samples.push(Sample {
            id,
            payload: SamplePayload::Classification {
                text: cols[0].to_string(),
                gold_label: cols[1].to_string(),
            },
        });
        predictions.push(Prediction {
            sample_id: id,
            payload: PredictionPayload::Classification {
                label: cols[2].to_string(),
                confidence,
            },
        });
    }
    if samples.is_empty() {
        return Err(IngestError::EmptyFile);
    }
    Ok(Parsed {
        samples,
        predictions,
        empty_sentences_dropped: 0,
    })
}

/// Gold-only classification file: `text \t gold`, extra columns ignored.
pub fn parse_classification_gold(bytes: &[u8]) -> Result<Vec<Sample>, IngestError> {
    let text = decode(bytes)?;
    let mut samples = Vec::new();
    for (line, record) in tsv_records(&text) {
        let cols: Vec<&str> = record.split('\t').collect();
        if !(2..=4).contains(&cols.len()) {
            return Err(IngestError::BadColumnCount {
                line,
                expected: "2 to 4",
                found: cols.len(),
            });
        }
        samples.push(Sample {
            id: samples.len(),
            payload: SamplePayload::Classification {
                text: cols[0].to_string(),
                gold_label: cols[1].to_string(),
            },
        });
    }
    if samples.is_empty() {
        return Err(IngestError::EmptyFile);
    }
    Ok(samples)
}

struct ConllSentence {
    tokens: Vec<String>,
    gold: Vec<Tag>,
    pred: Vec<Tag>,
}

fn read_conll(
    bytes: &[u8],
    token_col: usize,
    gold_col: usize,
    pred_col: Option<usize>,
) -> Result<(Vec<ConllSentence>, usize), IngestError> {
    let text = decode(bytes)?;
    let mut sentences = Vec::new();
    let mut current = ConllSentence {
        tokens: Vec::new(),
        gold: Vec::new(),
        pred: Vec::new(),
    };
    let mut saw_content = false;
    let mut blank_run = 0usize;
    let mut dropped = 0usize;

    let tag_at = |line: usize, cols: &[&str], idx: usize| -> Result<Tag, IngestError> {
        let raw = cols.get(idx).ok_or(IngestError::ColumnOutOfRange {
            line,
            column: idx,
            found: cols.len(),
        })?;
        raw.parse::<Tag>().map_err(|_| IngestError::MalformedTag {
            line,
            tag: raw.to_string(),
        })
    };

    for (i, raw_line) in text.lines().enumerate() {
        let line = i + 1;
        let cols: Vec<&str> = raw_line.split_whitespace().collect();
        let boundary = cols.is_empty() || cols[0] == "-DOCSTART-";
        if boundary {
            if current.tokens.is_empty() {
                // Consecutive blank lines are tolerated; more than two in a
                // row counts as an empty sentence.
                if saw_content && cols.is_empty() {
                    blank_run += 1;
                    if blank_run > 2 {
                        dropped += 1;
                    }
                }
            } else {
                sentences.push(std::mem::replace(
                    &mut current,
                    ConllSentence {
                        tokens: Vec::new(),
                        gold: Vec::new(),
                        pred: Vec::new(),
                    },
                ));
                blank_run = 1;
            }
            continue;
        }
        saw_content = true;
        blank_run = 0;
        let token = cols.get(token_col).ok_or(IngestError::ColumnOutOfRange {
            line,
            column: token_col,
            found: cols.len(),
        })?;
        let gold = tag_at(line, &cols, gold_col)?;
        if let Some(p) = pred_col {
            current.pred.push(tag_at(line, &cols, p)?);
        }
        current.tokens.push(token.to_string());
        current.gold.push(gold);
    }
    if !current.tokens.is_empty() {
        sentences.push(current);
    }
    if sentences.is_empty() {
        return Err(IngestError::EmptyFile);
    }
    Ok((sentences, dropped))
}

pub fn parse_conll(bytes: &[u8], columns: ConllColumns) -> Result<Parsed, IngestError> {
    let (sentences, dropped) = read_conll(bytes, columns.token, columns.gold, Some(columns.pred))?;
    let mut samples = Vec::with_capacity(sentences.len());
    let mut predictions = Vec::with_capacity(sentences.len());
    for (id, s) in sentences.into_iter().enumerate() {
        samples.push(Sample {
            id,
            payload: SamplePayload::Sequence {
                tokens: s.tokens,
                gold_tags: s.gold,
            },
        });
        predictions.push(Prediction {
            sample_id: id,
            payload: PredictionPayload::Sequence { tags: s.pred },
        });
    }
    Ok(Parsed {
        samples,
        predictions,
        empty_sentences_dropped: dropped,
    })
}

/// Gold-only CoNLL: token and gold columns, any further columns ignored.
pub fn parse_conll_gold(bytes: &[u8], token: usize, gold: usize) -> Result<Vec<Sample>, IngestError> {
    let (sentences, _) = read_conll(bytes, token, gold, None)?;
    Ok(sentences
        .into_iter()
        .enumerate()
        .map(|(id, s)| Sample {
            id,
            payload: SamplePayload::Sequence {
                tokens: s.tokens,
                gold_tags: s.gold,
            },
        })
        .collect())
}

pub fn parse_score_tsv(bytes: &[u8]) -> Result<Parsed, IngestError> {
    let text = decode(bytes)?;
    let mut seen = HashSet::new();
    let mut samples = Vec::new();
    let mut predictions = Vec::new();
    for (line, record) in tsv_records(&text) {
        let cols: Vec<&str> = record.split('\t').collect();
        if cols.len() != 2 {
            return Err(IngestError::BadColumnCount {
                line,
                expected: "2",
                found: cols.len(),
            });
        }
        let score = match cols[1].trim().parse::<f64>() {
            Ok(s) if s.is_finite() => s,
            _ => {
                return Err(IngestError::BadScore {
                    line,
                    value: cols[1].to_string(),
                })
            }
        };
        if !seen.insert(cols[0]) {
            return Err(IngestError::DuplicateSourceId {
                line,
                id: cols[0].to_string(),
            });
        }
        let id = samples.len();
        samples.push(Sample {
            id,
            payload: SamplePayload::Scored {
                source_id: cols[0].to_string(),
                reference: None,
            },
        });
        predictions.push(Prediction {
            sample_id: id,
            payload: PredictionPayload::Scored { score },
        });
    }
    if samples.is_empty() {
        return Err(IngestError::EmptyFile);
    }
    Ok(Parsed {
        samples,
        predictions,
        empty_sentences_dropped: 0,
    })
}

/// Gold-only generation file: `sourceId [\t referenceText]`.
pub fn parse_score_gold(bytes: &[u8]) -> Result<Vec<Sample>, IngestError> {
    let text = decode(bytes)?;
    let mut seen = HashSet::new();
    let mut samples = Vec::new();
    for (line, record) in tsv_records(&text) {
        let cols: Vec<&str> = record.split('\t').collect();
        if cols.len() > 2 {
            return Err(IngestError::BadColumnCount {
                line,
                expected: "1 or 2",
                found: cols.len(),
            });
        }
        if !seen.insert(cols[0]) {
            return Err(IngestError::DuplicateSourceId {
                line,
                id: cols[0].to_string(),
            });
        }
        samples.push(Sample {
            id: samples.len(),
            payload: SamplePayload::Scored {
                source_id: cols[0].to_string(),
                reference: cols.get(1).map(|s| s.to_string()),
            },
        });
    }
    if samples.is_empty() {
        return Err(IngestError::EmptyFile);
    }
    Ok(samples)
}

/// Counts gold entity surfaces (space-joined tokens) and tokens.
pub fn build_train_stats(bytes: &[u8], source_path: &str) -> Result<TrainStats, IngestError> {
    let samples = parse_conll_gold(bytes, 0, 1)?;
    let mut entity_surface_counts = BTreeMap::new();
    let mut token_counts = BTreeMap::new();
    for sample in &samples {
        if let SamplePayload::Sequence { tokens, gold_tags } = &sample.payload {
            for tok in tokens {
                *token_counts.entry(tok.clone()).or_insert(0) += 1;
            }
            for span in bio::extract_spans(gold_tags) {
                let surface = tokens[span.start..=span.end].join(" ");
                *entity_surface_counts.entry(surface).or_insert(0) += 1;
            }
        }
    }
    Ok(TrainStats {
        entity_surface_counts,
        token_counts,
        source: TrainSource {
            path: source_path.to_string(),
            hash: content_id(bytes),
        },
    })
}

pub fn serialize_classification_tsv(samples: &[Sample], predictions: &[Prediction]) -> String {
    let mut out = String::new();
    for (s, p) in samples.iter().zip(predictions) {
        if let (
            SamplePayload::Classification { text, gold_label },
            PredictionPayload::Classification { label, confidence },
        ) = (&s.payload, &p.payload)
        {
            let _ = write!(out, "{text}\t{gold_label}\t{label}");
            if let Some(c) = confidence {
                let _ = write!(out, "\t{c}");
            }
            out.push('\n');
        }
    }
    out
}

/// `token gold [pred]` lines, one blank line after each sentence.
pub fn serialize_conll(samples: &[Sample], predictions: Option<&[Prediction]>) -> String {
    let mut out = String::new();
    for (i, s) in samples.iter().enumerate() {
        let SamplePayload::Sequence { tokens, gold_tags } = &s.payload else {
            continue;
        };
        let pred = predictions.and_then(|p| match &p.get(i)?.payload {
            PredictionPayload::Sequence { tags } => Some(tags),
            _ => None,
        });
        for (j, (tok, gold)) in tokens.iter().zip(gold_tags).enumerate() {
            let _ = write!(out, "{tok} {gold}");
            if let Some(tag) = pred.and_then(|t| t.get(j)) {
                let _ = write!(out, " {tag}");
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

pub fn serialize_score_tsv(samples: &[Sample], predictions: &[Prediction]) -> String {
    let mut out = String::new();
    for (s, p) in samples.iter().zip(predictions) {
        if let (SamplePayload::Scored { source_id, .. }, PredictionPayload::Scored { score }) =
            (&s.payload, &p.payload)
        {
            let _ = writeln!(out, "{source_id}\t{score}");
        }
    }
    out
}

/// Parses a full system-output file (gold and predictions) for `task`.
pub fn parse_system_file(task: TaskKind, bytes: &[u8], columns: ConllColumns) -> Result<Parsed, IngestError> {
    match task {
        TaskKind::TextClassification => parse_classification_tsv(bytes),
        TaskKind::SequenceLabeling => parse_conll(bytes, columns),
        TaskKind::ScoredGeneration => parse_score_tsv(bytes),
    }
}

/// Reads a gold dataset file. Full system files are accepted too; only the
/// gold columns are kept.
pub fn load_dataset(id: &str, task: TaskKind, bytes: &[u8], columns: ConllColumns) -> Result<Dataset> {
    let samples = match task {
        TaskKind::TextClassification => parse_classification_gold(bytes)?,
        TaskKind::SequenceLabeling => parse_conll_gold(bytes, columns.token, columns.gold)?,
        TaskKind::ScoredGeneration => parse_score_gold(bytes)?,
    };
    Dataset::new(id, task, samples)
}

/// Reads a system output file and aligns it with `dataset`. The system id is
/// the content id of `bytes`.
pub fn load_system(dataset: &Dataset, bytes: &[u8], columns: ConllColumns) -> Result<SystemOutput> {
    let parsed = parse_system_file(dataset.task, bytes, columns)?;
    let system = SystemOutput::new(content_id(bytes), dataset.task, parsed.predictions)?;
    system.check_against(dataset)?;
    for (ds, ss) in dataset.samples.iter().zip(&parsed.samples) {
        match (&ds.payload, &ss.payload) {
            (SamplePayload::Sequence { tokens: a, .. }, SamplePayload::Sequence { tokens: b, .. })
                if a != b =>
            {
                return Err(Error::SampleMismatch {
                    sample_id: ds.id,
                    reason: "tokens differ from the dataset".into(),
                });
            }
            (
                SamplePayload::Scored { source_id: a, .. },
                SamplePayload::Scored { source_id: b, .. },
            ) if a != b => {
                return Err(Error::SampleMismatch {
                    sample_id: ds.id,
                    reason: format!("source id {b:?} where the dataset has {a:?}"),
                });
            }
            _ => {}
        }
    }
    Ok(system)
}

/// Writes `system` in its task's file format, taking gold fields from `dataset`.
pub fn serialize_system(dataset: &Dataset, system: &SystemOutput) -> String {
    match dataset.task {
        TaskKind::TextClassification => {
            serialize_classification_tsv(&dataset.samples, &system.predictions)
        }
        TaskKind::SequenceLabeling => serialize_conll(&dataset.samples, Some(&system.predictions)),
        TaskKind::ScoredGeneration => serialize_score_tsv(&dataset.samples, &system.predictions),
    }
}
