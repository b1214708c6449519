//! On-disk registry of datasets, systems and cached reports.
//!
//! ```text
//! <root>/datasets/<id>/{data.<ext>, train.conll, meta.json}
//! <root>/systems/<id>/{output.<ext>, meta.json}
//! <root>/reports/<key>.json
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use fineval_core::analysis::{now_timestamp, overall_value};
use fineval_core::combination::CombinedSystem;
use fineval_core::ingest::{build_train_stats, canonical_bytes, content_id, load_dataset, load_system, serialize_system, ConllColumns, FileFormatKind};
use fineval_core::report::ENGINE_VERSION;
use fineval_core::{Dataset, EvalMode, SystemOutput, TaskKind};
use serde::{Deserialize, Serialize};

use crate::error::{ServiceError, ServiceResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DatasetMeta {
    pub id: String,
    pub task_kind: TaskKind,
    pub sample_count: usize,
    pub data_file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_file: Option<String>,
    pub created_at: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    #[default]
    Submitted,
    Combined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SystemRecord {
    pub id: String,
    pub name: String,
    pub task_kind: TaskKind,
    pub dataset_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub submitter: Option<String>,
    pub created_at: String,
    pub output_path: String,
    pub overall_value: Option<f64>,
    #[serde(default)]
    pub kind: SystemKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub member_ids: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SubmitMeta {
    pub dataset_id: String,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub submitter: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Submission {
    pub id: String,
    pub duplicate: bool,
    pub record: SystemRecord,
}

struct DatasetEntry {
    meta: DatasetMeta,
    dataset: Arc<Dataset>,
}

struct SystemEntry {
    record: SystemRecord,
    output: Arc<SystemOutput>,
}

#[derive(Default)]
struct State {
    datasets: BTreeMap<String, DatasetEntry>,
    systems: BTreeMap<String, SystemEntry>,
}

pub struct Registry {
    root: PathBuf,
    state: RwLock<State>,
    /// Serializes report-cache writes; reads go straight to disk.
    cache_lock: RwLock<()>,
}

fn io_err(path: &Path, e: std::io::Error) -> ServiceError {
    ServiceError::Io(format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> ServiceResult<Vec<u8>> {
    fs::read(path).map_err(|e| io_err(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> ServiceResult<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    // Write-then-rename so a crash never leaves a half-written file.
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> ServiceResult<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| ServiceError::Io(e.to_string()))?;
    bytes.push(b'\n');
    write(path, &bytes)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> ServiceResult<T> {
    serde_json::from_slice(&read(path)?).map_err(|e| ServiceError::Io(format!("{}: {e}", path.display())))
}

pub fn valid_dataset_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

fn leaderboard_order(a: &SystemRecord, b: &SystemRecord) -> std::cmp::Ordering {
    match (a.overall_value, b.overall_value) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    }
    .then_with(|| a.id.cmp(&b.id))
}

impl Registry {
    /// Opens (creating if needed) the registry at `root` and loads everything in it.
    pub fn open(root: impl Into<PathBuf>) -> ServiceResult<Self> {
        let root = root.into();
        for sub in ["datasets", "systems", "reports"] {
            let dir = root.join(sub);
            fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        }
        let mut state = State::default();
        for dir in sorted_subdirs(&root.join("datasets"))? {
            let meta: DatasetMeta = read_json(&dir.join("meta.json"))?;
            let dataset = Self::load_dataset_files(&dir, &meta)?;
            state.datasets.insert(meta.id.clone(), DatasetEntry { meta, dataset: Arc::new(dataset) });
        }
        for dir in sorted_subdirs(&root.join("systems"))? {
            let record: SystemRecord = read_json(&dir.join("meta.json"))?;
            let entry = state
                .datasets
                .get(&record.dataset_id)
                .ok_or_else(|| ServiceError::UnknownDataset(record.dataset_id.clone()))?;
            let bytes = read(&dir.join(&record.output_path))?;
            let mut output = load_system(&entry.dataset, &bytes, ConllColumns::default())?;
            output.id = record.id.clone();
            state.systems.insert(record.id.clone(), SystemEntry { record, output: Arc::new(output) });
        }
        Ok(Registry {
            root,
            state: RwLock::new(state),
            cache_lock: RwLock::new(()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn load_dataset_files(dir: &Path, meta: &DatasetMeta) -> ServiceResult<Dataset> {
        let bytes = read(&dir.join(&meta.data_file))?;
        let mut dataset = load_dataset(&meta.id, meta.task_kind, &bytes, ConllColumns::default())?;
        if let Some(train) = &meta.train_file {
            let train_bytes = read(&dir.join(train))?;
            dataset = dataset.with_train_stats(build_train_stats(&train_bytes, train)?);
        }
        Ok(dataset)
    }

    /// Registers a gold dataset under a caller-chosen id.
    pub fn add_dataset(&self, id: &str, task: TaskKind, bytes: &[u8], train: Option<&[u8]>) -> ServiceResult<DatasetMeta> {
        if !valid_dataset_id(id) {
            return Err(ServiceError::InvalidId(id.to_string()));
        }
        let mut state = self.state.write().unwrap();
        if state.datasets.contains_key(id) {
            return Err(ServiceError::DatasetExists(id.to_string()));
        }
        let mut dataset = load_dataset(id, task, bytes, ConllColumns::default())?;
        let train_file = match train {
            Some(t) => {
                dataset = dataset.with_train_stats(build_train_stats(t, "train.conll")?);
                Some("train.conll".to_string())
            }
            None => None,
        };
        let meta = DatasetMeta {
            id: id.to_string(),
            task_kind: task,
            sample_count: dataset.len(),
            data_file: format!("data.{}", FileFormatKind::for_task(task).extension()),
            train_file,
            created_at: now_timestamp(),
        };
        let dir = self.root.join("datasets").join(id);
        write(&dir.join(&meta.data_file), &canonical_bytes(bytes))?;
        if let Some(t) = train {
            write(&dir.join("train.conll"), &canonical_bytes(t))?;
        }
        write_json(&dir.join("meta.json"), &meta)?;
        state.datasets.insert(id.to_string(), DatasetEntry { meta: meta.clone(), dataset: Arc::new(dataset) });
        Ok(meta)
    }

    /// Validates and stores a system output. Identical bytes return the
    /// existing record with `duplicate` set.
    pub fn submit_system(&self, meta: &SubmitMeta, bytes: &[u8]) -> ServiceResult<Submission> {
        let id = content_id(bytes);
        let mut state = self.state.write().unwrap();
        if let Some(existing) = state.systems.get(&id) {
            return Ok(Submission {
                id,
                duplicate: true,
                record: existing.record.clone(),
            });
        }
        let dataset = state
            .datasets
            .get(&meta.dataset_id)
            .ok_or_else(|| ServiceError::UnknownDataset(meta.dataset_id.clone()))?
            .dataset
            .clone();
        let output = load_system(&dataset, bytes, ConllColumns::default()).map_err(ServiceError::validation)?;
        let record = SystemRecord {
            id: id.clone(),
            name: meta.name.clone().filter(|n| !n.is_empty()).unwrap_or_else(|| id[..12].to_string()),
            task_kind: dataset.task,
            dataset_id: dataset.id.clone(),
            submitter: meta.submitter.clone(),
            created_at: now_timestamp(),
            output_path: format!("output.{}", FileFormatKind::for_task(dataset.task).extension()),
            overall_value: overall_value(&output, &dataset, EvalMode::default())?,
            kind: SystemKind::Submitted,
            member_ids: Vec::new(),
        };
        self.persist_system(&mut state, record.clone(), output, &canonical_bytes(bytes))?;
        Ok(Submission { id, duplicate: false, record })
    }

    /// Stores a combined system, flagged with its members.
    pub fn add_combined(&self, combined: &CombinedSystem, name: Option<String>) -> ServiceResult<Submission> {
        let mut state = self.state.write().unwrap();
        let id = combined.output.id.clone();
        if let Some(existing) = state.systems.get(&id) {
            return Ok(Submission { id, duplicate: true, record: existing.record.clone() });
        }
        let first = state
            .systems
            .get(&combined.member_ids[0])
            .ok_or_else(|| ServiceError::UnknownSystem(combined.member_ids[0].clone()))?;
        let dataset = state.datasets[&first.record.dataset_id].dataset.clone();
        let record = SystemRecord {
            id: id.clone(),
            name: name.unwrap_or_else(|| "comb".to_string()),
            task_kind: dataset.task,
            dataset_id: dataset.id.clone(),
            submitter: None,
            created_at: now_timestamp(),
            output_path: format!("output.{}", FileFormatKind::for_task(dataset.task).extension()),
            overall_value: overall_value(&combined.output, &dataset, EvalMode::default())?,
            kind: SystemKind::Combined,
            member_ids: combined.member_ids.clone(),
        };
        let bytes = serialize_system(&dataset, &combined.output);
        self.persist_system(&mut state, record.clone(), combined.output.clone(), bytes.as_bytes())?;
        Ok(Submission { id, duplicate: false, record })
    }

    fn persist_system(&self, state: &mut State, record: SystemRecord, output: SystemOutput, bytes: &[u8]) -> ServiceResult<()> {
        let dir = self.root.join("systems").join(&record.id);
        write(&dir.join(&record.output_path), bytes)?;
        write_json(&dir.join("meta.json"), &record)?;
        state.systems.insert(record.id.clone(), SystemEntry { record, output: Arc::new(output) });
        Ok(())
    }

    pub fn datasets(&self, task: Option<TaskKind>) -> Vec<DatasetMeta> {
        let state = self.state.read().unwrap();
        state
            .datasets
            .values()
            .filter(|e| task.is_none_or(|t| e.meta.task_kind == t))
            .map(|e| e.meta.clone())
            .collect()
    }

    pub fn dataset_meta(&self, id: &str) -> ServiceResult<DatasetMeta> {
        let state = self.state.read().unwrap();
        state.datasets.get(id).map(|e| e.meta.clone()).ok_or_else(|| ServiceError::UnknownDataset(id.to_string()))
    }

    pub fn dataset(&self, id: &str) -> ServiceResult<Arc<Dataset>> {
        let state = self.state.read().unwrap();
        state.datasets.get(id).map(|e| e.dataset.clone()).ok_or_else(|| ServiceError::UnknownDataset(id.to_string()))
    }

    /// Systems in leaderboard order: overall value descending, then id.
    pub fn systems(&self, dataset: Option<&str>) -> Vec<SystemRecord> {
        let state = self.state.read().unwrap();
        let mut rows: Vec<SystemRecord> = state
            .systems
            .values()
            .filter(|e| dataset.is_none_or(|d| e.record.dataset_id == d))
            .map(|e| e.record.clone())
            .collect();
        rows.sort_by(leaderboard_order);
        rows
    }

    pub fn system(&self, id: &str) -> ServiceResult<(SystemRecord, Arc<SystemOutput>)> {
        let state = self.state.read().unwrap();
        state
            .systems
            .get(id)
            .map(|e| (e.record.clone(), e.output.clone()))
            .ok_or_else(|| ServiceError::UnknownSystem(id.to_string()))
    }

    /// Systems by id plus the single dataset they were all evaluated on.
    pub fn systems_on_one_dataset(&self, ids: &[String]) -> ServiceResult<(Vec<Arc<SystemOutput>>, Arc<Dataset>)> {
        let mut outputs = Vec::with_capacity(ids.len());
        let mut dataset_id: Option<String> = None;
        for id in ids {
            let (record, output) = self.system(id)?;
            match &dataset_id {
                Some(d) if *d != record.dataset_id => return Err(fineval_core::Error::DatasetMismatch.into()),
                _ => dataset_id = Some(record.dataset_id),
            }
            outputs.push(output);
        }
        let dataset = match dataset_id {
            Some(d) => self.dataset(&d)?,
            None => return Err(ServiceError::BadRequest("no systems given".into())),
        };
        Ok((outputs, dataset))
    }

    fn report_path(&self, key: &str) -> PathBuf {
        self.root.join("reports").join(format!("{key}.json"))
    }

    /// Cache key over everything that determines a report body.
    pub fn report_key(parts: &serde_json::Value) -> String {
        let tagged = serde_json::json!({ "engineVersion": ENGINE_VERSION, "request": parts });
        content_id(tagged.to_string().as_bytes())
    }

    pub fn cached_report(&self, key: &str) -> Option<String> {
        let _guard = self.cache_lock.read().unwrap();
        fs::read_to_string(self.report_path(key)).ok()
    }

    pub fn store_report(&self, key: &str, body: &str) -> ServiceResult<()> {
        let _guard = self.cache_lock.write().unwrap();
        write(&self.report_path(key), body.as_bytes())
    }
}

fn sorted_subdirs(dir: &Path) -> ServiceResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let path = entry.map_err(|e| io_err(dir, e))?.path();
        if path.join("meta.json").is_file() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}
