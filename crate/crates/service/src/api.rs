//! JSON-over-HTTP access to an [`AnnotationStore`].
//!
//! Every response body is an envelope `{"data": ..., "error": ...}` with
//! exactly one of the two fields non-null.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, PoisonError, RwLock};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cbtnlu_core::evaluation::KappaMode;
use cbtnlu_core::{Annotation, Label, LabelSet};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};
use crate::store::{AnnotationStore, MergePolicy, PageQuery, DEFAULT_PAGE_SIZE};

pub type SharedStore = Arc<RwLock<AnnotationStore>>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub data: Option<T>,
    pub error: Option<ApiError>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRequest {
    pub annotator: String,
    #[serde(default)]
    pub add: Vec<String>,
    #[serde(default)]
    pub remove: Vec<String>,
}

/// One line of an exported corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub id: String,
    pub problem: String,
    pub negative_take: String,
    pub labels: Option<LabelSet>,
}

pub fn status_of(err: &ServiceError) -> StatusCode {
    match err {
        ServiceError::UnknownPost(_) => StatusCode::NOT_FOUND,
        ServiceError::UnknownLabel(_) | ServiceError::ConflictingRequest(_) => StatusCode::UNPROCESSABLE_ENTITY,
        ServiceError::BadPage(_) | ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
        ServiceError::NoDoublyAnnotatedPosts => StatusCode::CONFLICT,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

fn fail(status: StatusCode, code: &str, message: String) -> Response {
    let body: Envelope<()> = Envelope {
        data: None,
        error: Some(ApiError { code: code.to_string(), message }),
    };
    (status, Json(body)).into_response()
}

fn respond<T: Serialize>(result: Result<T>) -> Response {
    match result {
        Ok(data) => Json(Envelope { data: Some(data), error: None }).into_response(),
        Err(e) => {
            if status_of(&e).is_server_error() {
                log::error!("{e}");
            }
            fail(status_of(&e), e.name(), e.to_string())
        }
    }
}

type Params = std::result::Result<Query<HashMap<String, String>>, QueryRejection>;

fn params(q: Params) -> Result<HashMap<String, String>> {
    q.map(|Query(m)| m).map_err(|e| ServiceError::BadRequest(e.body_text()))
}

fn parse_usize(map: &HashMap<String, String>, key: &str, default: usize) -> Result<usize> {
    match map.get(key).map(String::as_str) {
        None | Some("") => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| ServiceError::BadPage(format!("{key} must be a positive integer, got `{v}`"))),
    }
}

fn required<'a>(map: &'a HashMap<String, String>, key: &str) -> Result<&'a str> {
    map.get(key)
        .map(String::as_str)
        .filter(|v| !v.is_empty())
        .ok_or_else(|| ServiceError::BadRequest(format!("missing query parameter `{key}`")))
}

fn page_query(map: &HashMap<String, String>) -> Result<PageQuery> {
    Ok(PageQuery {
        page: parse_usize(map, "page", 1)?,
        page_size: parse_usize(map, "page_size", DEFAULT_PAGE_SIZE)?,
        status: map.get("status").map_or(Ok(Default::default()), |s| s.parse())?,
        annotator: map.get("annotator").filter(|a| !a.is_empty()).cloned(),
    })
}

async fn list_posts(State(store): State<SharedStore>, q: Params) -> Response {
    respond(params(q).and_then(|m| {
        let query = page_query(&m)?;
        store.read().unwrap_or_else(PoisonError::into_inner).list_posts(&query)
    }))
}

async fn post_detail(State(store): State<SharedStore>, Path(id): Path<String>) -> Response {
    respond(store.read().unwrap_or_else(PoisonError::into_inner).post_detail(&id))
}

async fn put_labels(
    State(store): State<SharedStore>,
    Path(id): Path<String>,
    body: std::result::Result<Json<LabelRequest>, JsonRejection>,
) -> Response {
    let result = body
        .map_err(|e| ServiceError::BadRequest(e.body_text()))
        .and_then(|Json(req)| -> Result<Annotation> {
            let add: LabelSet = req.add.into_iter().collect();
            let remove: LabelSet = req.remove.into_iter().collect();
            store
                .write()
                .unwrap_or_else(PoisonError::into_inner)
                .put_labels(&id, &req.annotator, &add, &remove)
        });
    respond(result)
}

async fn catalog(State(store): State<SharedStore>) -> Response {
    let labels: Vec<Label> = store.read().unwrap_or_else(PoisonError::into_inner).catalog().labels().to_vec();
    respond(Ok(labels))
}

async fn agreement(State(store): State<SharedStore>, q: Params) -> Response {
    respond(params(q).and_then(|m| {
        let mode = match m.get("mode").map(String::as_str) {
            None | Some("") | Some("pooled") => KappaMode::Pooled,
            Some("per_label_mean") => KappaMode::PerLabelMean,
            Some(other) => return Err(ServiceError::BadRequest(format!("unknown kappa mode `{other}`"))),
        };
        let (a, b) = (required(&m, "a")?, required(&m, "b")?);
        store.read().unwrap_or_else(PoisonError::into_inner).agreement(a, b, mode)
    }))
}

async fn export(State(store): State<SharedStore>, q: Params) -> Response {
    respond(params(q).and_then(|m| {
        let policy = match m.get("policy").map(String::as_str) {
            None | Some("") | Some("union") => MergePolicy::Union,
            Some("primary") => MergePolicy::Primary(required(&m, "annotator")?.to_string()),
            Some(other) => return Err(ServiceError::BadRequest(format!("unknown merge policy `{other}`"))),
        };
        let dataset = store.read().unwrap_or_else(PoisonError::into_inner).export_gold(&policy);
        Ok(dataset
            .posts
            .into_iter()
            .map(|p| GoldRecord {
                labels: dataset.gold.get(&p.id).cloned(),
                id: p.id,
                problem: p.problem,
                negative_take: p.negative_take,
            })
            .collect::<Vec<_>>())
    }))
}

async fn not_found() -> Response {
    fail(StatusCode::NOT_FOUND, "NotFound", "no such endpoint".into())
}

pub fn router(store: SharedStore) -> Router {
    Router::new()
        .route("/api/posts", get(list_posts))
        .route("/api/posts/{id}", get(post_detail))
        .route("/api/posts/{id}/labels", post(put_labels))
        .route("/api/catalog", get(catalog))
        .route("/api/agreement", get(agreement))
        .route("/api/export", get(export))
        .fallback(not_found)
        .with_state(store)
}

/// Serves the API on `addr` until the process is stopped.
pub async fn serve(store: AnnotationStore, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(RwLock::new(store)))).await
}
