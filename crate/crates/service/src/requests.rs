//! Analysis requests shared by the HTTP API and the CLI.

use fineval_core::analysis::{pair_analysis, single_analysis, AnalysisOptions};
use fineval_core::combination::{combined_report, CombinedReport};
use fineval_core::report::to_canonical_json;
use fineval_core::{Attribute, BootstrapConfig, SystemOutput};
use serde::Serialize;
use serde_json::json;

use crate::error::{ServiceError, ServiceResult};
use crate::registry::{Registry, SystemRecord};

/// Defaults filled in for any missing knob, then validated.
pub fn bootstrap_config(replicates: Option<usize>, seed: Option<u64>, level: Option<f64>) -> ServiceResult<BootstrapConfig> {
    let d = BootstrapConfig::default();
    Ok(BootstrapConfig::new(
        replicates.unwrap_or(d.replicates),
        level.unwrap_or(d.confidence_level),
        seed.unwrap_or(d.seed),
    )?)
}

fn encode<T: Serialize>(value: &T) -> ServiceResult<String> {
    to_canonical_json(value).map_err(|e| ServiceError::Io(e.to_string()))
}

fn attr_names(attrs: &[Attribute]) -> Vec<&'static str> {
    attrs.iter().map(|a| a.name()).collect()
}

/// Canonical single-system report, served from the cache when possible.
pub fn cached_single(registry: &Registry, id: &str, attrs: &str, config: BootstrapConfig) -> ServiceResult<String> {
    let (outputs, dataset) = registry.systems_on_one_dataset(&[id.to_string()])?;
    let attrs = Attribute::parse_list(attrs, dataset.task)?;
    let key = Registry::report_key(&json!({
        "kind": "single",
        "systems": [id],
        "dataset": dataset.id,
        "attrs": attr_names(&attrs),
        "config": config,
    }));
    if let Some(body) = registry.cached_report(&key) {
        return Ok(body);
    }
    let report = single_analysis(&outputs[0], &dataset, &attrs, &AnalysisOptions::new(config))?;
    let body = encode(&report)?;
    registry.store_report(&key, &body)?;
    Ok(body)
}

pub fn cached_pair(registry: &Registry, a: &str, b: &str, attrs: &str, config: BootstrapConfig) -> ServiceResult<String> {
    let (outputs, dataset) = registry.systems_on_one_dataset(&[a.to_string(), b.to_string()])?;
    let attrs = Attribute::parse_list(attrs, dataset.task)?;
    let key = Registry::report_key(&json!({
        "kind": "pair",
        "systems": [a, b],
        "dataset": dataset.id,
        "attrs": attr_names(&attrs),
        "config": config,
    }));
    if let Some(body) = registry.cached_report(&key) {
        return Ok(body);
    }
    let report = pair_analysis(&outputs[0], &outputs[1], &dataset, &attrs, &AnalysisOptions::new(config))?;
    let body = encode(&report)?;
    registry.store_report(&key, &body)?;
    Ok(body)
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CombineResponse {
    #[serde(flatten)]
    pub combined: CombinedReport,
    pub duplicate: bool,
    pub record: SystemRecord,
}

/// Votes the given registered systems into a new one and stores it.
pub fn combine_and_persist(
    registry: &Registry,
    ids: &[String],
    attrs: &str,
    config: BootstrapConfig,
    name: Option<String>,
) -> ServiceResult<CombineResponse> {
    if ids.len() < 2 {
        return Err(fineval_core::Error::NeedTwoOrMoreSystems(ids.len()).into());
    }
    let (outputs, dataset) = registry.systems_on_one_dataset(ids)?;
    let attrs = Attribute::parse_list(attrs, dataset.task)?;
    let refs: Vec<&SystemOutput> = outputs.iter().map(|o| o.as_ref()).collect();
    let (combined, report) = combined_report(&refs, &dataset, &attrs, &AnalysisOptions::new(config))?;
    let submission = registry.add_combined(&combined, name)?;
    Ok(CombineResponse {
        combined: report,
        duplicate: submission.duplicate,
        record: submission.record,
    })
}
