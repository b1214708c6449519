//! Fine-grained evaluation of NLP system outputs.
//!
//! Datasets and system outputs are parsed by [`ingest`], split into
//! interpretable buckets by [`bucketing`], scored by [`metrics`] and
//! qualified with bootstrap intervals by [`reliability`]. [`analysis`]
//! builds the reports; [`combination`] votes systems into a new one.

pub mod analysis;
pub mod attributes;
pub mod bio;
pub mod bucketing;
pub mod combination;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod reliability;
pub mod report;

pub use attributes::{Attribute, AttributeValue};
pub use bio::{BioMode, Span, Tag};
pub use error::{Error, IngestError, Result};
pub use metrics::{MetricKind, MetricTally};
pub use model::{Dataset, EvalMode, EvaluationUnit, Prediction, Sample, SystemOutput, TaskKind};
pub use reliability::BootstrapConfig;
pub use report::AnalysisReport;
