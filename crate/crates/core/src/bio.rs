//! BIO tags and entity span extraction.
//!
//! Extraction is lenient by default: an `I-X` that does not continue a span
//! of the same label opens a new span, as if it were `B-X`. Strict mode
//! rejects such transitions instead.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Tag {
    Outside,
    Begin(String),
    Inside(String),
}

impl Tag {
    pub fn label(&self) -> Option<&str> {
        match self {
            Tag::Outside => None,
            Tag::Begin(l) | Tag::Inside(l) => Some(l),
        }
    }

    pub fn is_outside(&self) -> bool {
        matches!(self, Tag::Outside)
    }
}

impl FromStr for Tag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "O" {
            return Ok(Tag::Outside);
        }
        let (prefix, label) = match (s.get(..2), s.get(2..)) {
            (Some(p), Some(l)) => (p, l),
            _ => return Err(Error::MalformedTag(s.to_string())),
        };
        if label.is_empty() || label.chars().any(char::is_whitespace) {
            return Err(Error::MalformedTag(s.to_string()));
        }
        match prefix {
            "B-" => Ok(Tag::Begin(label.to_string())),
            "I-" => Ok(Tag::Inside(label.to_string())),
            _ => Err(Error::MalformedTag(s.to_string())),
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::Outside => f.write_str("O"),
            Tag::Begin(l) => write!(f, "B-{l}"),
            Tag::Inside(l) => write!(f, "I-{l}"),
        }
    }
}

impl Serialize for Tag {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Tag {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Entity span over inclusive token indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

impl Span {
    pub fn new(start: usize, end: usize, label: impl Into<String>) -> Self {
        Span {
            start,
            end,
            label: label.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn same_extent(&self, other: &Span) -> bool {
        self.start == other.start && self.end == other.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BioMode {
    #[default]
    Lenient,
    Strict,
}

pub fn parse_tags<S: AsRef<str>>(tags: &[S]) -> Result<Vec<Tag>> {
    tags.iter().map(|t| t.as_ref().parse()).collect()
}

fn continues(prev: Option<&Tag>, label: &str) -> bool {
    matches!(prev, Some(Tag::Begin(l)) | Some(Tag::Inside(l)) if l == label)
}

/// Maximal spans under lenient repair.
pub fn extract_spans(tags: &[Tag]) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut open: Option<Span> = None;
    for (i, tag) in tags.iter().enumerate() {
        match tag {
            Tag::Outside => {
                spans.extend(open.take());
            }
            Tag::Begin(label) => {
                spans.extend(open.take());
                open = Some(Span::new(i, i, label.clone()));
            }
            Tag::Inside(label) => match open.as_mut() {
                Some(span) if span.label == *label => span.end = i,
                _ => {
                    spans.extend(open.take());
                    open = Some(Span::new(i, i, label.clone()));
                }
            },
        }
    }
    spans.extend(open);
    spans
}

/// Like [`extract_spans`] but fails on an orphan `I-X`.
pub fn extract_spans_strict(tags: &[Tag]) -> Result<Vec<Span>> {
    for (i, tag) in tags.iter().enumerate() {
        if let Tag::Inside(label) = tag {
            if !continues(i.checked_sub(1).map(|p| &tags[p]), label) {
                return Err(Error::InvalidTransition {
                    position: i,
                    tag: tag.to_string(),
                });
            }
        }
    }
    Ok(extract_spans(tags))
}

pub fn extract_spans_with(tags: &[Tag], mode: BioMode) -> Result<Vec<Span>> {
    match mode {
        BioMode::Lenient => Ok(extract_spans(tags)),
        BioMode::Strict => extract_spans_strict(tags),
    }
}

/// Promotes every orphan `I-X` to `B-X`.
pub fn repair(tags: &[Tag]) -> Vec<Tag> {
    let mut out: Vec<Tag> = Vec::with_capacity(tags.len());
    for tag in tags {
        let fixed = match tag {
            Tag::Inside(label) if !continues(out.last(), label) => Tag::Begin(label.clone()),
            other => other.clone(),
        };
        out.push(fixed);
    }
    out
}

pub fn is_valid(tags: &[Tag]) -> bool {
    extract_spans_strict(tags).is_ok()
}
