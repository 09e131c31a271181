//! HTTP API.

use crate::error::{ErrorBody, Result, ServiceError};
use crate::ops::{self, BuildRequest, PathRequest};
use crate::store::{GraphRecord, MeshFormat, ProjectStore};
use accessgraph::analysis::ViewshedConfig;
use accessgraph::geometry::io::UpAxis;
use accessgraph::geometry::Labels;
use accessgraph::BuildReport;
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};
use tokio::sync::Semaphore;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.body())).into_response()
    }
}

fn body<T>(payload: std::result::Result<Json<T>, JsonRejection>) -> Result<T> {
    payload.map(|Json(v)| v).map_err(|e| ServiceError::BadRequest(e.body_text()))
}

fn query<T>(q: std::result::Result<Query<T>, QueryRejection>) -> Result<T> {
    q.map(|Query(v)| v).map_err(|e| ServiceError::BadRequest(e.body_text()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub graph_id: String,
    pub status: JobStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<BuildReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

#[derive(Default)]
struct JobTable {
    next: u64,
    jobs: BTreeMap<String, Job>,
    /// Graph id to the job currently building it.
    inflight: HashMap<String, String>,
}

pub struct AppState {
    pub store: Arc<ProjectStore>,
    jobs: Mutex<JobTable>,
    workers: Arc<Semaphore>,
    threads: Option<usize>,
}

impl AppState {
    /// `workers` bounds concurrent builds; `threads` sizes each build's
    /// thread pool.
    pub fn new(store: Arc<ProjectStore>, workers: usize, threads: Option<usize>) -> Arc<Self> {
        Arc::new(AppState {
            store,
            jobs: Mutex::new(JobTable::default()),
            workers: Arc::new(Semaphore::new(workers.max(1))),
            threads,
        })
    }

    fn set_job(&self, id: &str, f: impl FnOnce(&mut Job)) {
        let mut table = self.jobs.lock().expect("job lock");
        if let Some(job) = table.jobs.get_mut(id) {
            f(job);
            if matches!(job.status, JobStatus::Done | JobStatus::Failed) {
                let graph = job.graph_id.clone();
                table.inflight.remove(&graph);
            }
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/scenes", post(post_scene).get(list_scenes))
        .route("/scenes/:id", get(get_scene))
        .route("/graphs", post(post_graph).get(list_graphs))
        .route("/graphs/:id", get(get_graph))
        .route("/graphs/:id/viewshed", post(post_viewshed))
        .route("/graphs/:id/paths", post(post_path))
        .route("/graphs/:id/heatmap", get(get_heatmap))
        .route("/graphs/:id/report", get(get_report))
        .route("/jobs/:id", get(get_job))
        .with_state(state)
}

/// Runs blocking store and compute work off the async workers.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T> + Send + 'static) -> Result<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Internal(format!("worker failed: {e}")))?
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneUpload {
    name: String,
    /// OBJ text.
    #[serde(default)]
    obj: Option<String>,
    /// ASCII PLY text.
    #[serde(default)]
    ply: Option<String>,
    #[serde(default)]
    labels: Option<Labels>,
    #[serde(default)]
    up: UpAxis,
}

async fn post_scene(
    State(state): State<Arc<AppState>>,
    payload: std::result::Result<Json<SceneUpload>, JsonRejection>,
) -> Result<Response> {
    let upload = body(payload)?;
    let (format, data) = match (upload.obj, upload.ply) {
        (Some(obj), None) => (MeshFormat::Obj, obj.into_bytes()),
        (None, Some(ply)) => (MeshFormat::Ply, ply.into_bytes()),
        _ => return Err(ServiceError::BadRequest("give exactly one of `obj` or `ply`".into())),
    };
    let store = state.store.clone();
    let (record, created) = blocking(move || {
        store.add_scene(&upload.name, format, &data, upload.labels.as_ref(), upload.up)
    })
    .await?;
    let status = if created { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(record)).into_response())
}

async fn list_scenes(State(state): State<Arc<AppState>>) -> Response {
    Json(state.store.scenes()).into_response()
}

#[derive(Serialize)]
struct SceneMesh {
    #[serde(flatten)]
    record: crate::store::SceneRecord,
    /// Flattened xyz positions of all objects.
    positions: Vec<f64>,
    indices: Vec<u32>,
    /// Object index per triangle.
    object_ids: Vec<u32>,
}

async fn get_scene(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response> {
    let store = state.store.clone();
    let mesh = blocking(move || {
        let record = store.scene(&id)?;
        let scene = store.load_scene(&record)?;
        let (mut positions, mut indices, mut object_ids) = (Vec::new(), Vec::new(), Vec::new());
        for (k, obj) in scene.objects().iter().enumerate() {
            let base = (positions.len() / 3) as u32;
            positions.extend(obj.mesh.vertices.iter().flat_map(|p| [p.x, p.y, p.z]));
            for t in &obj.mesh.triangles {
                indices.extend(t.iter().map(|i| base + i));
                object_ids.push(k as u32);
            }
        }
        Ok(SceneMesh {
            record,
            positions,
            indices,
            object_ids,
        })
    })
    .await?;
    Ok(Json(mesh).into_response())
}

#[derive(Serialize)]
struct GraphAccepted {
    graph_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    job_id: Option<String>,
    status: JobStatus,
    cached: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    graph: Option<GraphRecord>,
}

async fn post_graph(
    State(state): State<Arc<AppState>>,
    payload: std::result::Result<Json<BuildRequest>, JsonRejection>,
) -> Result<Response> {
    let req = body(payload)?;
    let store = state.store.clone();
    let prepared = blocking(move || ops::prepare_build(&store, &req)).await?;
    let prepared = match prepared {
        Ok(record) => {
            let reply = GraphAccepted {
                graph_id: record.id.clone(),
                job_id: None,
                status: JobStatus::Done,
                cached: true,
                graph: Some(record),
            };
            return Ok((StatusCode::OK, Json(reply)).into_response());
        }
        Err(prepared) => prepared,
    };
    let graph_id = prepared.graph_id.clone();
    let job_id = {
        let mut table = state.jobs.lock().expect("job lock");
        if let Some(existing) = table.inflight.get(&graph_id) {
            existing.clone()
        } else {
            table.next += 1;
            let id = format!("job-{}", table.next);
            table.jobs.insert(
                id.clone(),
                Job {
                    id: id.clone(),
                    graph_id: graph_id.clone(),
                    status: JobStatus::Queued,
                    report: None,
                    error: None,
                },
            );
            table.inflight.insert(graph_id.clone(), id.clone());
            let state = state.clone();
            let job = id.clone();
            tokio::spawn(async move {
                let permit = state.workers.clone().acquire_owned().await;
                state.set_job(&job, |j| j.status = JobStatus::Running);
                let store = state.store.clone();
                let threads = state.threads;
                let outcome = blocking(move || ops::run_build(&store, prepared, threads)).await;
                drop(permit);
                state.set_job(&job, |j| match outcome {
                    Ok(record) => {
                        j.status = JobStatus::Done;
                        j.report = Some(record.report);
                    }
                    Err(e) => {
                        j.status = JobStatus::Failed;
                        j.error = Some(e.body());
                    }
                });
            });
            id
        }
    };
    let reply = GraphAccepted {
        graph_id,
        job_id: Some(job_id),
        status: JobStatus::Queued,
        cached: false,
        graph: None,
    };
    Ok((StatusCode::ACCEPTED, Json(reply)).into_response())
}

async fn list_graphs(State(state): State<Arc<AppState>>) -> Response {
    Json(state.store.graphs()).into_response()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PageQuery {
    #[serde(default)]
    offset: usize,
    #[serde(default)]
    limit: Option<usize>,
    /// `bin` returns the CSR file instead of JSON.
    #[serde(default)]
    format: Option<String>,
}

async fn get_graph(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    q: std::result::Result<Query<PageQuery>, QueryRejection>,
) -> Result<Response> {
    let q = query(q)?;
    let store = state.store.clone();
    match q.format.as_deref() {
        None | Some("json") => {
            let page = blocking(move || ops::graph_page(&store, &id, q.offset, q.limit)).await?;
            Ok(Json(page).into_response())
        }
        Some("bin") => {
            let bytes = blocking(move || ops::export(&store, &id, ops::ExportFormat::Bin)).await?;
            Ok(([(header::CONTENT_TYPE, "application/octet-stream")], bytes).into_response())
        }
        Some(other) => Err(ServiceError::BadRequest(format!("unknown format `{other}`"))),
    }
}

async fn post_viewshed(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    payload: std::result::Result<Json<ViewshedConfig>, JsonRejection>,
) -> Result<Response> {
    let config = body(payload)?;
    let store = state.store.clone();
    let threads = state.threads;
    let permit = state.workers.clone().acquire_owned().await;
    let summary = blocking(move || ops::run_viewshed(&store, &id, &config, threads)).await;
    drop(permit);
    Ok(Json(summary?).into_response())
}

async fn post_path(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    payload: std::result::Result<Json<PathRequest>, JsonRejection>,
) -> Result<Response> {
    let req = body(payload)?;
    let store = state.store.clone();
    let result = blocking(move || ops::path(&store, &id, &req)).await?;
    match result {
        Some(p) => Ok(Json(p).into_response()),
        None => Ok(Json(serde_json::Value::Null).into_response()),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetricQuery {
    metric: String,
}

async fn get_heatmap(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    q: std::result::Result<Query<MetricQuery>, QueryRejection>,
) -> Result<Response> {
    let metric = ops::parse_metric(&query(q)?.metric)?;
    let store = state.store.clone();
    let (_, h) = blocking(move || ops::run_heatmap(&store, &id, &metric)).await?;
    Ok(Json(h).into_response())
}

async fn get_report(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response> {
    let store = state.store.clone();
    Ok(Json(blocking(move || ops::report(&store, &id)).await?).into_response())
}

async fn get_job(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response> {
    let table = state.jobs.lock().expect("job lock");
    let job = table.jobs.get(&id).cloned().ok_or_else(|| ServiceError::not_found("job", id))?;
    Ok(Json(job).into_response())
}
