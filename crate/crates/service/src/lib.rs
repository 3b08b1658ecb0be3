//! HTTP API over an open project.

use std::collections::BTreeSet;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use tessera_core::annotations::{AnnotationError, CodeFilter, HighlightPatch, NewHighlight};
use tessera_core::blockmodel::BlockModelError;
use tessera_core::corpus::Span;
use tessera_core::inference::JobError;
use tessera_core::layout::LayoutError;
use tessera_core::project::{Project, ProjectError, Workbench};
use tessera_core::sampler::SamplerError;

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn bad_request(message: impl ToString) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            code: "BadRequest",
            message: message.to_string(),
        }
    }
}

impl From<ProjectError> for ApiError {
    fn from(e: ProjectError) -> Self {
        use StatusCode as S;
        let message = e.to_string();
        let (status, code) = match &e {
            ProjectError::NotFound { .. } => (S::NOT_FOUND, "NotFound"),
            ProjectError::Config(_) => (S::BAD_REQUEST, "InvalidConfig"),
            ProjectError::Job(JobError::Busy { .. }) => (S::CONFLICT, "Busy"),
            ProjectError::Job(JobError::NotFound(_)) => (S::NOT_FOUND, "NotFound"),
            ProjectError::Layout(LayoutError::InvalidLevel { .. })
            | ProjectError::Sampler(SamplerError::BlockModel(BlockModelError::InvalidLevel { .. })) => {
                (S::BAD_REQUEST, "InvalidLevel")
            }
            ProjectError::Sampler(SamplerError::SampleTooLarge { .. }) => (S::BAD_REQUEST, "SampleTooLarge"),
            ProjectError::Sampler(SamplerError::EmptyRequest) => (S::BAD_REQUEST, "EmptyRequest"),
            ProjectError::Annotation(a) => match a {
                AnnotationError::NotFound { .. } | AnnotationError::UnknownDocument(_) => (S::NOT_FOUND, "NotFound"),
                AnnotationError::SpanOutOfRange { .. } => (S::BAD_REQUEST, "SpanOutOfRange"),
                AnnotationError::OverlappingHighlight { .. } => (S::CONFLICT, "OverlappingHighlight"),
                AnnotationError::KeywordConflict { .. } => (S::CONFLICT, "KeywordConflict"),
                AnnotationError::InvalidKeyword { .. } => (S::BAD_REQUEST, "InvalidKeyword"),
                AnnotationError::ReservedCode => (S::BAD_REQUEST, "ReservedCode"),
                AnnotationError::EmptyLabel => (S::BAD_REQUEST, "EmptyLabel"),
                AnnotationError::DuplicateLabel(_) => (S::CONFLICT, "DuplicateLabel"),
                AnnotationError::CodeInUse(_) => (S::CONFLICT, "CodeInUse"),
                AnnotationError::Storage(_) => (S::INTERNAL_SERVER_ERROR, "Storage"),
            },
            _ => (S::INTERNAL_SERVER_ERROR, "Internal"),
        };
        ApiError { status, code, message }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::bad_request(e.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        ApiError::bad_request(e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({"error": {"code": self.code, "message": self.message}});
        (self.status, canonical_body(&body)).into_response()
    }
}

/// Pretty JSON with sorted keys and a trailing newline.
fn canonical_body<T: Serialize>(value: &T) -> ([(header::HeaderName, &'static str); 1], String) {
    let value = serde_json::to_value(value).expect("serializable payload");
    let mut text = serde_json::to_string_pretty(&value).expect("serializable payload");
    text.push('\n');
    ([(header::CONTENT_TYPE, "application/json")], text)
}

struct Canonical<T>(T);

impl<T: Serialize> IntoResponse for Canonical<T> {
    fn into_response(self) -> Response {
        canonical_body(&self.0).into_response()
    }
}

type ApiResult<T> = Result<Canonical<T>, ApiError>;
type Wb = State<Arc<Workbench>>;

pub fn router(workbench: Arc<Workbench>) -> Router {
    Router::new()
        .route("/api/corpus/stats", get(corpus_stats))
        .route("/api/map", get(map))
        .route("/api/documents/{id}", get(document))
        .route("/api/sample/random", post(sample_random))
        .route("/api/sample/cluster", post(sample_cluster))
        .route("/api/words/tree", get(word_tree))
        .route("/api/highlights", get(list_highlights).post(create_highlight))
        .route("/api/highlights/{id}", patch(update_highlight).delete(delete_highlight))
        .route("/api/codes", get(list_codes))
        .route("/api/codes/summary", get(code_summary))
        .route("/api/codes/{id}", axum::routing::delete(delete_code))
        .route("/api/codes/{id}/category", post(assign_category))
        .route("/api/codes/{id}/rename", post(rename_code))
        .route("/api/model/update", post(model_update))
        .route("/api/jobs/{id}", get(job_status))
        .route("/api/snapshots", get(snapshots))
        .route("/api/export.csv", get(export_csv))
        .route("/api/keywords/candidates", get(keyword_candidates))
        .with_state(workbench)
}

/// Opens the project, fits snapshot 0 if needed and serves on localhost.
pub async fn serve(project_dir: &Path, port: u16) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    let project = Project::open(project_dir)?;
    let workbench = tokio::task::spawn_blocking(move || -> Result<_, ProjectError> {
        let wb = Workbench::open(project)?;
        wb.bootstrap()?;
        Ok(wb)
    })
    .await??;
    let addr = SocketAddr::from(([127, 0, 0, 1], port));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(workbench)).await?;
    Ok(())
}

fn parse_list(raw: &str) -> Vec<String> {
    raw.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect()
}

async fn corpus_stats(State(wb): Wb) -> ApiResult<impl Serialize> {
    Ok(Canonical(wb.stats()))
}

#[derive(Deserialize)]
struct MapQuery {
    snapshot: Option<u64>,
    level: Option<usize>,
    /// `all` (default), `none`, or a comma-separated list of code ids.
    codes: Option<String>,
}

async fn map(State(wb): Wb, q: Result<Query<MapQuery>, QueryRejection>) -> ApiResult<impl Serialize> {
    let Query(q) = q?;
    let filter = match q.codes.as_deref().map(str::trim) {
        None | Some("all") => CodeFilter::All,
        Some("none") | Some("") => CodeFilter::None,
        Some(list) => {
            let ids: BTreeSet<String> = parse_list(list).into_iter().collect();
            let store = wb.annotations();
            if let Some(bad) = ids.iter().find(|id| store.code(id).is_none()) {
                return Err(ProjectError::NotFound {
                    kind: "code",
                    id: bad.clone(),
                }
                .into());
            }
            CodeFilter::Codes(ids)
        }
    };
    Ok(Canonical(wb.map(q.snapshot, q.level, &filter)?))
}

#[derive(Deserialize)]
struct DocumentQuery {
    preview: Option<usize>,
}

async fn document(
    State(wb): Wb,
    UrlPath(id): UrlPath<String>,
    q: Result<Query<DocumentQuery>, QueryRejection>,
) -> ApiResult<impl Serialize> {
    let Query(q) = q?;
    Ok(Canonical(wb.document(&id, q.preview)?))
}

#[derive(Deserialize)]
struct RandomRequest {
    n: usize,
    seed: Option<u64>,
    #[serde(default)]
    exclude: Vec<String>,
}

async fn sample_random(State(wb): Wb, body: Result<Json<RandomRequest>, JsonRejection>) -> ApiResult<impl Serialize> {
    let Json(req) = body?;
    let seed = req.seed.unwrap_or_else(|| {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_nanos() as u64)
    });
    let doc_ids = wb.sample_random(req.n, seed, &req.exclude)?;
    Ok(Canonical(json!({"seed": seed, "doc_ids": doc_ids})))
}

#[derive(Deserialize)]
struct ClusterRequest {
    snapshot: Option<u64>,
    cluster_id: u32,
    level: usize,
    k: Option<usize>,
}

async fn sample_cluster(State(wb): Wb, body: Result<Json<ClusterRequest>, JsonRejection>) -> ApiResult<impl Serialize> {
    let Json(req) = body?;
    let snapshot = req.snapshot.or_else(|| wb.latest_snapshot_id());
    let docs = wb.sample_cluster(snapshot, req.cluster_id, req.level, req.k)?;
    Ok(Canonical(json!({
        "snapshot_id": snapshot,
        "cluster_id": req.cluster_id,
        "level": req.level,
        "documents": docs,
    })))
}

#[derive(Deserialize)]
struct TreeQuery {
    snapshot: Option<u64>,
    #[serde(default)]
    codes: String,
}

async fn word_tree(State(wb): Wb, q: Result<Query<TreeQuery>, QueryRejection>) -> ApiResult<impl Serialize> {
    let Query(q) = q?;
    let snapshot = q.snapshot.or_else(|| wb.latest_snapshot_id());
    let roots = wb.word_tree(snapshot, &parse_list(&q.codes))?;
    Ok(Canonical(json!({"snapshot_id": snapshot, "roots": roots})))
}

#[derive(Deserialize)]
struct HighlightQuery {
    doc: Option<String>,
}

async fn list_highlights(State(wb): Wb, q: Result<Query<HighlightQuery>, QueryRejection>) -> ApiResult<impl Serialize> {
    let Query(q) = q?;
    let store = wb.annotations();
    let highlights: Vec<_> = store
        .highlights
        .iter()
        .filter(|h| q.doc.as_ref().is_none_or(|d| &h.doc_id == d))
        .collect();
    Ok(Canonical(json!({"version": store.version, "highlights": highlights})))
}

#[derive(Deserialize)]
struct HighlightRequest {
    doc_id: String,
    start: usize,
    end: usize,
    code_label: String,
    #[serde(default)]
    keywords: BTreeSet<u32>,
    #[serde(default)]
    memo: String,
}

async fn create_highlight(State(wb): Wb, body: Result<Json<HighlightRequest>, JsonRejection>) -> ApiResult<impl Serialize> {
    let Json(req) = body?;
    let new = NewHighlight {
        doc_id: req.doc_id,
        span: Span::new(req.start, req.end),
        code_label: req.code_label,
        keywords: req.keywords,
        memo: req.memo,
    };
    let (highlight, version) = wb.mutate(|store, corpus| store.create_highlight(corpus, new))?;
    Ok(Canonical(json!({"version": version, "highlight": highlight})))
}

async fn update_highlight(
    State(wb): Wb,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<HighlightPatch>, JsonRejection>,
) -> ApiResult<impl Serialize> {
    let Json(patch) = body?;
    let (highlight, version) = wb.mutate(|store, corpus| store.update_highlight(corpus, &id, patch))?;
    Ok(Canonical(json!({"version": version, "highlight": highlight})))
}

async fn delete_highlight(State(wb): Wb, UrlPath(id): UrlPath<String>) -> ApiResult<impl Serialize> {
    let ((), version) = wb.mutate(|store, corpus| store.delete_highlight(corpus, &id))?;
    Ok(Canonical(json!({"version": version, "deleted": id})))
}

async fn list_codes(State(wb): Wb) -> ApiResult<impl Serialize> {
    let store = wb.annotations();
    Ok(Canonical(json!({
        "version": store.version,
        "codes": store.codes,
        "categories": store.categories,
    })))
}

#[derive(Deserialize)]
struct SummaryQuery {
    #[serde(default)]
    codes: String,
}

async fn code_summary(State(wb): Wb, q: Result<Query<SummaryQuery>, QueryRejection>) -> ApiResult<impl Serialize> {
    let Query(q) = q?;
    let store = wb.annotations();
    let summaries = store
        .code_summary(wb.corpus(), &parse_list(&q.codes))
        .map_err(ProjectError::from)?;
    Ok(Canonical(json!({"version": store.version, "codes": summaries})))
}

#[derive(Deserialize)]
struct LabelRequest {
    label: String,
}

async fn assign_category(
    State(wb): Wb,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<LabelRequest>, JsonRejection>,
) -> ApiResult<impl Serialize> {
    let Json(req) = body?;
    let (category, version) = wb.mutate(|store, _| store.assign_category(&id, &req.label))?;
    Ok(Canonical(json!({"version": version, "code_id": id, "category": category})))
}

async fn rename_code(
    State(wb): Wb,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<LabelRequest>, JsonRejection>,
) -> ApiResult<impl Serialize> {
    let Json(req) = body?;
    let (code, version) = wb.mutate(|store, _| store.rename_code(&id, &req.label))?;
    Ok(Canonical(json!({"version": version, "code": code})))
}

async fn delete_code(State(wb): Wb, UrlPath(id): UrlPath<String>) -> ApiResult<impl Serialize> {
    let ((), version) = wb.mutate(|store, _| store.delete_code(&id))?;
    Ok(Canonical(json!({"version": version, "deleted": id})))
}

async fn model_update(State(wb): Wb) -> Result<(StatusCode, Canonical<impl Serialize>), ApiError> {
    let job = wb.request_update()?;
    Ok((StatusCode::ACCEPTED, Canonical(job)))
}

async fn job_status(State(wb): Wb, UrlPath(id): UrlPath<u64>) -> ApiResult<impl Serialize> {
    Ok(Canonical(wb.job_status(id)?))
}

async fn snapshots(State(wb): Wb) -> ApiResult<impl Serialize> {
    Ok(Canonical(json!({"snapshots": wb.list_snapshots()})))
}

async fn export_csv(State(wb): Wb) -> Result<Response, ApiError> {
    let csv = wb.export_csv()?;
    Ok((
        [
            (header::CONTENT_TYPE, "text/csv; charset=utf-8"),
            (header::CONTENT_DISPOSITION, "attachment; filename=\"export.csv\""),
        ],
        csv,
    )
        .into_response())
}

#[derive(Deserialize)]
struct CandidateQuery {
    doc: String,
    start: usize,
    end: usize,
}

async fn keyword_candidates(State(wb): Wb, q: Result<Query<CandidateQuery>, QueryRejection>) -> ApiResult<impl Serialize> {
    let Query(q) = q?;
    let candidates = wb.keyword_candidates(&q.doc, q.start, q.end)?;
    Ok(Canonical(json!({"doc_id": q.doc, "start": q.start, "end": q.end, "candidates": candidates})))
}
