//! HTTP API under `/api/v1`.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use fineval_core::analysis::ErrorCase;
use fineval_core::attributes::ValueKind;
use fineval_core::ingest::FileFormatKind;
use fineval_core::report::to_canonical_json;
use fineval_core::{Attribute, BootstrapConfig, TaskKind};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::{Any, CorsLayer};
use tower_http::services::ServeDir;

use crate::error::{ServiceError, ServiceResult};
use crate::registry::{Registry, SubmitMeta};
use crate::requests;

pub const DEFAULT_PAGE_SIZE: usize = 50;
const MAX_PAGE_SIZE: usize = 1000;
const MAX_UPLOAD: usize = 256 * 1024 * 1024;

#[derive(Clone)]
pub struct AppState {
    pub registry: Arc<Registry>,
}

type Params = Query<HashMap<String, String>>;

fn json_body(body: String) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn canonical<T: Serialize>(value: &T) -> ServiceResult<Response> {
    to_canonical_json(value)
        .map(json_body)
        .map_err(|e| ServiceError::Io(e.to_string()))
}

async fn blocking<T, F>(f: F) -> ServiceResult<T>
where
    F: FnOnce() -> ServiceResult<T> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Io(e.to_string()))?
}

fn param<T: std::str::FromStr>(params: &HashMap<String, String>, name: &str) -> ServiceResult<Option<T>> {
    match params.get(name).map(|s| s.trim()).filter(|s| !s.is_empty()) {
        None => Ok(None),
        Some(raw) => raw
            .parse()
            .map(Some)
            .map_err(|_| ServiceError::BadRequest(format!("invalid value {raw:?} for parameter {name}"))),
    }
}

fn bootstrap(params: &HashMap<String, String>) -> ServiceResult<BootstrapConfig> {
    requests::bootstrap_config(param(params, "b")?, param(params, "seed")?, param(params, "level")?)
}

fn id_list(raw: Option<&String>) -> Vec<String> {
    raw.map(|s| s.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect())
        .unwrap_or_default()
}

pub fn router(registry: Arc<Registry>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/tasks", get(tasks))
        .route("/datasets", get(list_datasets).post(upload_dataset))
        .route("/datasets/{id}", get(get_dataset))
        .route("/systems", get(list_systems).post(submit_system))
        .route("/systems/{id}", get(get_system))
        .route("/analysis/single/{id}", get(single))
        .route("/analysis/pair/{a}/{b}", get(pair))
        .route("/analysis/bias", get(bias))
        .route("/analysis/combine", post(combine))
        .route("/errors/common", get(common_errors))
        .route("/errors/unique", get(unique_errors))
        .route("/errors/{id}", get(bucket_errors))
        .route("/calibration/{id}", get(calibration))
        .fallback(|| async {
            let body = json!({ "error": { "code": "NotFound", "message": "no such endpoint" } });
            (StatusCode::NOT_FOUND, Json(body))
        });
    let mut app = Router::new()
        .nest("/api/v1", api)
        .layer(DefaultBodyLimit::max(MAX_UPLOAD))
        .layer(CorsLayer::new().allow_origin(Any).allow_methods(Any).allow_headers(Any))
        .with_state(AppState { registry });
    if let Some(dir) = static_dir {
        app = app.fallback_service(ServeDir::new(dir));
    }
    app
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct AttributeInfo {
    name: &'static str,
    value_kind: ValueKind,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct TaskInfo {
    task_kind: TaskKind,
    metric_name: &'static str,
    file_format: FileFormatKind,
    attributes: Vec<AttributeInfo>,
    calibration: bool,
    combination: bool,
}

async fn tasks() -> ServiceResult<Response> {
    let infos: Vec<TaskInfo> = TaskKind::ALL
        .iter()
        .map(|&t| TaskInfo {
            task_kind: t,
            metric_name: t.metric().name(),
            file_format: FileFormatKind::for_task(t),
            attributes: Attribute::defaults_for(t)
                .into_iter()
                .map(|a| AttributeInfo { name: a.name(), value_kind: a.value_kind() })
                .collect(),
            calibration: t == TaskKind::TextClassification,
            combination: t != TaskKind::ScoredGeneration,
        })
        .collect();
    canonical(&infos)
}

async fn list_datasets(State(s): State<AppState>, Query(p): Params) -> ServiceResult<Response> {
    let task: Option<TaskKind> = param(&p, "task")?;
    canonical(&s.registry.datasets(task))
}

async fn get_dataset(State(s): State<AppState>, Path(id): Path<String>) -> ServiceResult<Response> {
    canonical(&s.registry.dataset_meta(&id)?)
}

async fn list_systems(State(s): State<AppState>, Query(p): Params) -> ServiceResult<Response> {
    canonical(&s.registry.systems(p.get("dataset").map(String::as_str)))
}

async fn get_system(State(s): State<AppState>, Path(id): Path<String>) -> ServiceResult<Response> {
    canonical(&s.registry.system(&id)?.0)
}

async fn read_multipart(mut form: Multipart) -> ServiceResult<HashMap<String, Vec<u8>>> {
    let mut fields = HashMap::new();
    while let Some(field) = form.next_field().await.map_err(|e| ServiceError::BadRequest(e.to_string()))? {
        let name = field.name().unwrap_or_default().to_string();
        let bytes = field.bytes().await.map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        fields.insert(name, bytes.to_vec());
    }
    Ok(fields)
}

fn text_field(fields: &HashMap<String, Vec<u8>>, name: &str) -> ServiceResult<Option<String>> {
    fields
        .get(name)
        .map(|b| String::from_utf8(b.clone()).map_err(|_| ServiceError::BadRequest(format!("field {name} is not UTF-8"))))
        .transpose()
}

async fn upload_dataset(State(s): State<AppState>, form: Multipart) -> ServiceResult<Response> {
    let fields = read_multipart(form).await?;
    let id = text_field(&fields, "id")?.ok_or_else(|| ServiceError::BadRequest("missing field id".into()))?;
    let task: TaskKind = text_field(&fields, "task")?
        .ok_or_else(|| ServiceError::BadRequest("missing field task".into()))?
        .parse()
        .map_err(|_| ServiceError::BadRequest("unknown task".into()))?;
    let file = fields.get("file").cloned().ok_or_else(|| ServiceError::BadRequest("missing field file".into()))?;
    let train = fields.get("train").cloned();
    let registry = s.registry.clone();
    let meta = blocking(move || registry.add_dataset(&id, task, &file, train.as_deref())).await?;
    Ok((StatusCode::CREATED, canonical(&meta)?).into_response())
}

async fn submit_system(State(s): State<AppState>, form: Multipart) -> ServiceResult<Response> {
    let fields = read_multipart(form).await?;
    let meta: SubmitMeta = match fields.get("meta") {
        Some(raw) => serde_json::from_slice(raw).map_err(|e| ServiceError::BadRequest(format!("meta: {e}")))?,
        None => SubmitMeta {
            dataset_id: text_field(&fields, "datasetId")?.unwrap_or_default(),
            name: text_field(&fields, "name")?,
            submitter: text_field(&fields, "submitter")?,
        },
    };
    let file = fields.get("file").cloned().ok_or_else(|| ServiceError::BadRequest("missing field file".into()))?;
    let registry = s.registry.clone();
    let submission = blocking(move || registry.submit_system(&meta, &file)).await?;
    let status = if submission.duplicate { StatusCode::OK } else { StatusCode::CREATED };
    Ok((status, canonical(&submission)?).into_response())
}

async fn single(State(s): State<AppState>, Path(id): Path<String>, Query(p): Params) -> ServiceResult<Response> {
    let config = bootstrap(&p)?;
    let attrs = p.get("attrs").cloned().unwrap_or_default();
    let registry = s.registry.clone();
    blocking(move || requests::cached_single(&registry, &id, &attrs, config)).await.map(json_body)
}

async fn pair(State(s): State<AppState>, Path((a, b)): Path<(String, String)>, Query(p): Params) -> ServiceResult<Response> {
    let config = bootstrap(&p)?;
    let attrs = p.get("attrs").cloned().unwrap_or_default();
    let registry = s.registry.clone();
    blocking(move || requests::cached_pair(&registry, &a, &b, &attrs, config)).await.map(json_body)
}

async fn bias(State(s): State<AppState>, Query(p): Params) -> ServiceResult<Response> {
    let ids = id_list(p.get("datasets"));
    let attrs = p.get("attrs").cloned().unwrap_or_default();
    let registry = s.registry.clone();
    let profile = blocking(move || {
        let datasets = ids.iter().map(|id| registry.dataset(id)).collect::<ServiceResult<Vec<_>>>()?;
        let refs: Vec<&fineval_core::Dataset> = datasets.iter().map(|d| d.as_ref()).collect();
        let task = refs.first().map(|d| d.task).ok_or_else(|| ServiceError::BadRequest("datasets is empty".into()))?;
        let attrs = Attribute::parse_list(&attrs, task)?;
        Ok(fineval_core::analysis::bias_analysis(&refs, &attrs)?)
    })
    .await?;
    canonical(&profile)
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct CombineRequest {
    system_ids: Vec<String>,
    #[serde(default)]
    attrs: Option<String>,
    #[serde(default)]
    b: Option<usize>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    level: Option<f64>,
    #[serde(default)]
    name: Option<String>,
}

async fn combine(State(s): State<AppState>, body: axum::body::Bytes) -> ServiceResult<Response> {
    let req: CombineRequest =
        serde_json::from_slice(&body).map_err(|e| ServiceError::BadRequest(format!("request body: {e}")))?;
    let config = requests::bootstrap_config(req.b, req.seed, req.level)?;
    let registry = s.registry.clone();
    let out = blocking(move || {
        requests::combine_and_persist(&registry, &req.system_ids, req.attrs.as_deref().unwrap_or(""), config, req.name)
    })
    .await?;
    canonical(&out)
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Page {
    pub items: Vec<ErrorCase>,
    pub page: usize,
    pub page_size: usize,
    pub total: usize,
    pub total_pages: usize,
}

fn paginate(items: Vec<ErrorCase>, p: &HashMap<String, String>) -> ServiceResult<Page> {
    let page: usize = param(p, "page")?.unwrap_or(1);
    let page_size: usize = param(p, "pageSize")?.unwrap_or(DEFAULT_PAGE_SIZE);
    if page == 0 || page_size == 0 || page_size > MAX_PAGE_SIZE {
        return Err(ServiceError::BadRequest(format!(
            "page must be >= 1 and pageSize in 1..={MAX_PAGE_SIZE}"
        )));
    }
    let total = items.len();
    let items = items.into_iter().skip((page - 1) * page_size).take(page_size).collect();
    Ok(Page {
        items,
        page,
        page_size,
        total,
        total_pages: total.div_ceil(page_size),
    })
}

async fn bucket_errors(State(s): State<AppState>, Path(id): Path<String>, Query(p): Params) -> ServiceResult<Response> {
    let bucket = p.get("bucket").cloned().ok_or_else(|| ServiceError::BadRequest("missing parameter bucket".into()))?;
    let registry = s.registry.clone();
    let cases = blocking(move || {
        let (outputs, dataset) = registry.systems_on_one_dataset(std::slice::from_ref(&id))?;
        Ok(fineval_core::analysis::bucket_errors(&outputs[0], &dataset, &bucket, Default::default())?)
    })
    .await?;
    canonical(&paginate(cases, &p)?)
}

async fn common_errors(State(s): State<AppState>, Query(p): Params) -> ServiceResult<Response> {
    let ids = id_list(p.get("systems"));
    let registry = s.registry.clone();
    let cases = blocking(move || {
        if ids.len() < 2 {
            return Err(fineval_core::Error::NeedTwoOrMoreSystems(ids.len()).into());
        }
        let (outputs, dataset) = registry.systems_on_one_dataset(&ids)?;
        let refs: Vec<&fineval_core::SystemOutput> = outputs.iter().map(|o| o.as_ref()).collect();
        Ok(fineval_core::analysis::common_errors(&refs, &dataset, Default::default())?)
    })
    .await?;
    canonical(&paginate(cases, &p)?)
}

async fn unique_errors(State(s): State<AppState>, Query(p): Params) -> ServiceResult<Response> {
    let ids: Vec<String> = ["a", "b"].iter().filter_map(|k| p.get(*k).cloned()).collect();
    let registry = s.registry.clone();
    let cases = blocking(move || {
        if ids.len() != 2 {
            return Err(fineval_core::Error::NeedTwoSystems(ids.len()).into());
        }
        let (outputs, dataset) = registry.systems_on_one_dataset(&ids)?;
        Ok(fineval_core::analysis::unique_errors(&outputs[0], &outputs[1], &dataset, Default::default())?)
    })
    .await?;
    canonical(&paginate(cases, &p)?)
}

async fn calibration(State(s): State<AppState>, Path(id): Path<String>, Query(p): Params) -> ServiceResult<Response> {
    let bins: usize = param(&p, "bins")?.unwrap_or(10);
    let registry = s.registry.clone();
    let report = blocking(move || {
        let (outputs, dataset) = registry.systems_on_one_dataset(std::slice::from_ref(&id))?;
        Ok(fineval_core::reliability::calibration(&dataset, &outputs[0], bins)?)
    })
    .await?;
    canonical(&report)
}

/// Binds `addr` and serves until the process exits.
pub async fn serve(registry: Arc<Registry>, addr: std::net::SocketAddr, static_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("fineval listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(registry, static_dir)).await
}
