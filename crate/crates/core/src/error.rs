use thiserror::Error;

use crate::model::TaskKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Parse failure with a 1-based line position where one exists.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum IngestError {
    #[error("file is empty")]
    EmptyFile,
    #[error("input is not valid UTF-8 (byte offset {offset})")]
    InvalidUtf8 { offset: usize },
    #[error("line {line}: expected {expected} tab-separated columns, found {found}")]
    BadColumnCount {
        line: usize,
        expected: &'static str,
        found: usize,
    },
    #[error("line {line}: confidence {value:?} is not a real number in [0, 1]")]
    BadConfidence { line: usize, value: String },
    #[error("line {line}: confidence present on some records but not others")]
    MixedConfidence { line: usize },
    #[error("line {line}: column {column} is out of range ({found} columns present)")]
    ColumnOutOfRange {
        line: usize,
        column: usize,
        found: usize,
    },
    #[error("line {line}: malformed BIO tag {tag:?}")]
    MalformedTag { line: usize, tag: String },
    #[error("line {line}: score {value:?} is not a finite real number")]
    BadScore { line: usize, value: String },
    #[error("line {line}: duplicate source id {id:?}")]
    DuplicateSourceId { line: usize, id: String },
}

impl IngestError {
    pub fn code(&self) -> &'static str {
        match self {
            IngestError::EmptyFile => "EmptyFile",
            IngestError::InvalidUtf8 { .. } => "InvalidUtf8",
            IngestError::BadColumnCount { .. } => "BadColumnCount",
            IngestError::BadConfidence { .. } => "BadConfidence",
            IngestError::MixedConfidence { .. } => "MixedConfidence",
            IngestError::ColumnOutOfRange { .. } => "ColumnOutOfRange",
            IngestError::MalformedTag { .. } => "MalformedTag",
            IngestError::BadScore { .. } => "BadScore",
            IngestError::DuplicateSourceId { .. } => "DuplicateSourceId",
        }
    }

    pub fn line(&self) -> Option<usize> {
        match self {
            IngestError::EmptyFile | IngestError::InvalidUtf8 { .. } => None,
            IngestError::BadColumnCount { line, .. }
            | IngestError::BadConfidence { line, .. }
            | IngestError::MixedConfidence { line }
            | IngestError::ColumnOutOfRange { line, .. }
            | IngestError::MalformedTag { line, .. }
            | IngestError::BadScore { line, .. }
            | IngestError::DuplicateSourceId { line, .. } => Some(*line),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("malformed BIO tag {0:?}")]
    MalformedTag(String),
    #[error("orphan {tag:?} at token {position} (strict BIO mode)")]
    InvalidTransition { position: usize, tag: String },
    #[error("invalid sample: {0}")]
    InvalidSample(String),
    #[error("invalid prediction: {0}")]
    InvalidPrediction(String),
    #[error("unknown attribute {name:?} for task {task}")]
    UnknownAttribute { name: String, task: TaskKind },
    #[error("attribute eFreq requires training statistics (strict mode)")]
    MissingTrainStats,
    #[error("task mismatch: expected {expected}, found {found}")]
    TaskMismatch { expected: TaskKind, found: TaskKind },
    #[error("sample count mismatch: dataset has {expected}, system output has {found}")]
    SampleCountMismatch { expected: usize, found: usize },
    #[error("sample {sample_id} does not match the dataset: {reason}")]
    SampleMismatch { sample_id: usize, reason: String },
    #[error("systems were evaluated on different datasets")]
    DatasetMismatch,
    #[error("unknown bucket {0:?}")]
    UnknownBucket(String),
    #[error("this selection needs exactly two systems, got {0}")]
    NeedTwoSystems(usize),
    #[error("this selection needs two or more systems, got {0}")]
    NeedTwoOrMoreSystems(usize),
    #[error("bucket error lookup takes exactly one system, got {0}")]
    NeedOneSystem(usize),
    #[error("error-case analysis is not defined for {0}")]
    ErrorAnalysisUnsupportedTask(TaskKind),
    #[error("no data to resample")]
    NoData,
    #[error("invalid bootstrap configuration: {0}")]
    InvalidBootstrapConfig(String),
    #[error("calibration is only available for text classification, not {0}")]
    CalibrationUnsupportedTask(TaskKind),
    #[error("calibration requires a confidence on every prediction")]
    MissingConfidences,
    #[error("bin count must be at least 1")]
    InvalidBinCount,
    #[error("system combination is not supported for {0}")]
    CombinationUnsupportedTask(TaskKind),
}

impl Error {
    /// Stable machine-readable code, used verbatim by the HTTP API.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Ingest(e) => e.code(),
            Error::MalformedTag(_) => "MalformedTag",
            Error::InvalidTransition { .. } => "InvalidTransition",
            Error::InvalidSample(_) => "InvalidSample",
            Error::InvalidPrediction(_) => "InvalidPrediction",
            Error::UnknownAttribute { .. } => "UnknownAttribute",
            Error::MissingTrainStats => "MissingTrainStats",
            Error::TaskMismatch { .. } => "TaskMismatch",
            Error::SampleCountMismatch { .. } => "SampleCountMismatch",
            Error::SampleMismatch { .. } => "SampleMismatch",
            Error::DatasetMismatch => "DatasetMismatch",
            Error::UnknownBucket(_) => "UnknownBucket",
            Error::NeedTwoSystems(_) => "NeedTwoSystems",
            Error::NeedTwoOrMoreSystems(_) => "NeedTwoOrMoreSystems",
            Error::NeedOneSystem(_) => "NeedOneSystem",
            Error::ErrorAnalysisUnsupportedTask(_) => "ErrorAnalysisUnsupportedTask",
            Error::NoData => "NoData",
            Error::InvalidBootstrapConfig(_) => "InvalidBootstrapConfig",
            Error::CalibrationUnsupportedTask(_) => "CalibrationUnsupportedTask",
            Error::MissingConfidences => "MissingConfidences",
            Error::InvalidBinCount => "InvalidBinCount",
            Error::CombinationUnsupportedTask(_) => "CombinationUnsupportedTask",
        }
    }
}
