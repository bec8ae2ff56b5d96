use std::fmt::Debug;
use std::path::PathBuf;
use std::sync::Arc;

use aiodc_core::analyze::{one_way, two_way, AnalyzeError, Attribute};
use aiodc_core::annotate::{
    AnnotateError, AnnotationSession, Compared, DefectStatus, Progress, RecordError, SessionEvent,
    SessionStore, StoreError,
};
use aiodc_core::report::ContingencyView;
use aiodc_core::taxonomy::validate_impact_path;
use aiodc_core::{AiAttribute, ClassificationLabel, DefectRecord, ImpactPath, Severity};
use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::services::ServeDir;

use crate::AppState;

type Shared = Arc<AppState>;

/// Header naming the caller when no `annotator` field or parameter is given.
pub const ANNOTATOR_HEADER: &str = "x-annotator";

pub fn app(state: Shared, static_dir: Option<PathBuf>) -> Router {
    let router = Router::new()
        .route("/health", get(health))
        .route("/rubric", get(rubric))
        .route("/sessions", get(list_sessions).post(create_session))
        .route("/sessions/:id/next", get(next_task))
        .route("/sessions/:id/labels", get(own_labels).post(post_label))
        .route("/sessions/:id/disputes", get(disputes))
        .route("/sessions/:id/resolutions", axum::routing::post(post_resolution))
        .route("/sessions/:id/stats", get(stats))
        .route("/analysis/one-way", get(analysis_one_way))
        .route("/analysis/two-way", get(analysis_two_way));
    let router = match static_dir {
        Some(dir) => router.nest_service("/ui", ServeDir::new(dir)),
        None => router,
    };
    router
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "NotFound", "no such endpoint") })
        .with_state(state)
}

#[derive(Debug)]
struct ApiError {
    status: StatusCode,
    code: String,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            status,
            code: code.into(),
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "BadRequest", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.code, "message": self.message }))).into_response()
    }
}

/// `Foo(..)` / `Foo { .. }` → `Foo`
fn variant_name(e: &impl Debug) -> String {
    let s = format!("{e:?}");
    s.split(|c: char| !c.is_alphanumeric()).next().unwrap_or_default().to_string()
}

impl From<AnnotateError> for ApiError {
    fn from(e: AnnotateError) -> Self {
        let status = match &e {
            AnnotateError::UnknownDefect(_) => StatusCode::NOT_FOUND,
            AnnotateError::NotDisputed(_)
            | AnnotateError::ResolverIsParty(_)
            | AnnotateError::LabelsFrozen(_)
            | AnnotateError::UnresolvedDisputes(_) => StatusCode::CONFLICT,
            AnnotateError::Agreement(_) => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::BAD_REQUEST,
        };
        let code = match &e {
            AnnotateError::Agreement(k) => variant_name(k),
            other => variant_name(other),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::UnknownSession(_) => ApiError::new(StatusCode::NOT_FOUND, "UnknownSession", e.to_string()),
            StoreError::SessionExists(_) => ApiError::new(StatusCode::CONFLICT, "SessionExists", e.to_string()),
            StoreError::Annotate(a) => a.into(),
        }
    }
}

impl From<RecordError> for ApiError {
    fn from(e: RecordError) -> Self {
        match e {
            RecordError::Store(s) => s.into(),
            RecordError::Io(io) => {
                tracing::error!(error = %io, "session log append failed");
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "PersistenceFailure", io.to_string())
            }
        }
    }
}

impl From<AnalyzeError> for ApiError {
    fn from(e: AnalyzeError) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, variant_name(&e), e.to_string())
    }
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

fn session<'s>(store: &'s SessionStore, id: &str) -> Result<&'s AnnotationSession, ApiError> {
    store
        .get(id)
        .ok_or_else(|| StoreError::UnknownSession(id.to_string()).into())
}

fn caller(explicit: Option<String>, headers: &HeaderMap, role: &str) -> Result<String, ApiError> {
    explicit
        .or_else(|| {
            headers
                .get(ANNOTATOR_HEADER)
                .and_then(|v| v.to_str().ok())
                .map(str::to_string)
        })
        .filter(|s| !s.trim().is_empty())
        .ok_or_else(|| ApiError::bad_request(format!("missing {role} (field, query parameter or X-Annotator header)")))
}

async fn record(state: &AppState, event: SessionEvent) -> Result<(bool, tokio::sync::RwLockWriteGuard<'_, SessionStore>), ApiError> {
    let mut store = state.store.write().await;
    let changed = store.record(&state.log_path, event)?;
    Ok((changed, store))
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

async fn rubric(State(state): State<Shared>) -> Json<Value> {
    let ai: Vec<Value> = AiAttribute::CATEGORIES
        .iter()
        .map(|a| json!({ "name": a.name(), "description": a.description() }))
        .collect();
    let severity: Vec<Value> = Severity::DESCENDING
        .iter()
        .map(|s| json!({ "name": s.name(), "rank": s.rank() }))
        .collect();
    Json(json!({
        "ai": ai,
        "severity": severity,
        "characteristics": state.taxonomy.characteristics(),
        "taxonomy_version": state.taxonomy.version,
        "rules_version": state.rules.version,
    }))
}

#[derive(Serialize)]
struct SessionSummary {
    id: String,
    project: String,
    defects: usize,
    annotators: Vec<String>,
    progress: Progress,
}

fn summary(id: &str, s: &AnnotationSession) -> SessionSummary {
    SessionSummary {
        id: id.to_string(),
        project: s.project.clone(),
        defects: s.defects().len(),
        annotators: s.annotators().to_vec(),
        progress: s.progress(),
    }
}

async fn list_sessions(State(state): State<Shared>) -> Json<Vec<SessionSummary>> {
    let store = state.store.read().await;
    Json(store.sessions().map(|(id, s)| summary(id, s)).collect())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    #[serde(default)]
    id: Option<String>,
    project: String,
    /// Every dataset record when absent.
    #[serde(default)]
    defects: Option<Vec<String>>,
    annotators: Vec<String>,
}

async fn create_session(State(state): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateSession = parse_body(&body)?;
    let defects = match req.defects {
        Some(ids) => {
            if let Some(unknown) = ids.iter().find(|d| !state.records.contains_key(*d)) {
                return Err(AnnotateError::UnknownDefect(unknown.clone()).into());
            }
            ids
        }
        None => state.records.keys().cloned().collect(),
    };
    let id = req.id.unwrap_or_else(|| req.project.clone());
    let event = SessionEvent::Opened {
        session: id.clone(),
        project: req.project,
        defects,
        annotators: req.annotators,
    };
    let (changed, store) = record(&state, event).await?;
    let status = if changed { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(summary(&id, session(&store, &id)?))).into_response())
}

#[derive(Deserialize)]
struct AnnotatorQuery {
    annotator: Option<String>,
}

#[derive(Serialize)]
struct NextTask<'a> {
    defect_id: Option<&'a str>,
    /// Dataset fields only; no label from any annotator.
    defect: Option<&'a DefectRecord>,
    remaining: usize,
}

async fn next_task(
    State(state): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<AnnotatorQuery>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let annotator = caller(q.annotator, &headers, "annotator")?;
    let store = state.store.read().await;
    let s = session(&store, &id)?;
    if !s.is_enrolled(&annotator) {
        return Err(AnnotateError::UnknownAnnotator(annotator).into());
    }
    let mut open: Vec<&String> = s
        .defects()
        .iter()
        .filter(|d| s.label(d, &annotator).is_none() && s.status(d) != DefectStatus::Resolved)
        .collect();
    open.sort();
    let first = open.first().map(|d| d.as_str());
    Ok(Json(NextTask {
        defect_id: first,
        defect: first.and_then(|d| state.records.get(d)),
        remaining: open.len(),
    })
    .into_response())
}

async fn own_labels(
    State(state): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<AnnotatorQuery>,
    headers: HeaderMap,
) -> Result<Json<Vec<ClassificationLabel>>, ApiError> {
    let annotator = caller(q.annotator, &headers, "annotator")?;
    let store = state.store.read().await;
    let s = session(&store, &id)?;
    if !s.is_enrolled(&annotator) {
        return Err(AnnotateError::UnknownAnnotator(annotator).into());
    }
    Ok(Json(
        s.defects()
            .iter()
            .filter_map(|d| s.label(d, &annotator).cloned())
            .collect(),
    ))
}

/// The label fields a client supplies; annotator and provenance are set by
/// the server.
#[derive(Deserialize)]
struct LabelInput {
    defect_id: String,
    ai: AiAttribute,
    #[serde(default)]
    severity: Option<Severity>,
    #[serde(default)]
    impacts: Vec<ImpactPath>,
    #[serde(default)]
    rationale: Option<String>,
}

impl LabelInput {
    fn into_label(self, state: &AppState) -> Result<ClassificationLabel, ApiError> {
        for p in &self.impacts {
            validate_impact_path(p, &state.taxonomy).map_err(|e| {
                ApiError::new(StatusCode::BAD_REQUEST, "InvalidImpactPath", format!("{p}: {e}"))
            })?;
        }
        let mut l = ClassificationLabel::human(self.defect_id, self.ai, self.severity);
        l.impacts = self.impacts;
        l.rationale = self.rationale;
        Ok(l)
    }
}

#[derive(Deserialize)]
struct PostLabel {
    #[serde(default)]
    annotator: Option<String>,
    #[serde(flatten)]
    label: LabelInput,
}

#[derive(Serialize)]
struct Ack {
    defect_id: String,
    status: DefectStatus,
    changed: bool,
}

async fn post_label(
    State(state): State<Shared>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Json<Ack>, ApiError> {
    let req: PostLabel = parse_body(&body)?;
    let annotator = caller(req.annotator, &headers, "annotator")?;
    let label = req.label.into_label(&state)?;
    let defect_id = label.defect_id.clone();
    let event = SessionEvent::Labeled {
        session: id.clone(),
        annotator,
        label,
    };
    let (changed, store) = record(&state, event).await?;
    let status = session(&store, &id)?.status(&defect_id);
    Ok(Json(Ack {
        defect_id,
        status,
        changed,
    }))
}

#[derive(Deserialize)]
struct DisputeQuery {
    attr: Option<String>,
}

async fn disputes(
    State(state): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<DisputeQuery>,
) -> Result<Response, ApiError> {
    let attr: Compared = match q.attr {
        Some(a) => a.parse().map_err(|e| ApiError::bad_request(format!("{e}")))?,
        None => Compared::Combined,
    };
    let store = state.store.read().await;
    let s = session(&store, &id)?;
    Ok(Json(s.list_disputes(attr)).into_response())
}

#[derive(Deserialize)]
struct PostResolution {
    #[serde(default)]
    resolver: Option<String>,
    #[serde(flatten)]
    label: LabelInput,
}

async fn post_resolution(
    State(state): State<Shared>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Json<Ack>, ApiError> {
    let req: PostResolution = parse_body(&body)?;
    let resolver = caller(req.resolver, &headers, "resolver")?;
    let label = req.label.into_label(&state)?;
    let defect_id = label.defect_id.clone();
    let event = SessionEvent::Resolved {
        session: id.clone(),
        defect_id: defect_id.clone(),
        resolver,
        label,
    };
    let (changed, store) = record(&state, event).await?;
    let status = session(&store, &id)?.status(&defect_id);
    Ok(Json(Ack {
        defect_id,
        status,
        changed,
    }))
}

fn outcome<T: Serialize, E: Debug + std::fmt::Display>(r: Result<T, E>) -> Value {
    match r {
        Ok(v) => serde_json::to_value(v).expect("serializable"),
        Err(e) => json!({ "error": variant_name(&e), "message": e.to_string() }),
    }
}

fn kappa_outcome(s: &AnnotationSession, attr: Compared) -> Value {
    match s.cohen_kappa(attr) {
        Ok(r) => serde_json::to_value(r).expect("serializable"),
        Err(AnnotateError::Agreement(k)) => json!({ "error": variant_name(&k), "message": k.to_string() }),
        Err(e) => json!({ "error": variant_name(&e), "message": e.to_string() }),
    }
}

async fn stats(State(state): State<Shared>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let store = state.store.read().await;
    let s = session(&store, &id)?;
    let labels = s.consolidated_so_far();
    let two = two_way(&labels, Attribute::Ai, Attribute::Severity);
    Ok(Json(json!({
        "session": id,
        "progress": s.progress(),
        "agreement": {
            "ai": kappa_outcome(s, Compared::Ai),
            "severity": kappa_outcome(s, Compared::Severity),
            "combined": kappa_outcome(s, Compared::Combined),
        },
        "consolidated": labels.len(),
        "one_way": {
            "ai": outcome(one_way(&labels, Attribute::Ai)),
            "severity": outcome(one_way(&labels, Attribute::Severity)),
        },
        "two_way": match &two {
            Ok(t) => serde_json::to_value(ContingencyView::new(t)).expect("serializable"),
            Err(e) => json!({ "error": variant_name(e), "message": e.to_string() }),
        },
    })))
}

#[derive(Deserialize)]
struct AnalysisQuery {
    attr: Option<String>,
    session: Option<String>,
}

/// Consolidated labels of the named session, or of the only session.
fn analysis_labels(store: &SessionStore, session_id: Option<&str>) -> Result<Vec<ClassificationLabel>, ApiError> {
    let s = match session_id {
        Some(id) => session(store, id)?,
        None => {
            let mut all = store.sessions();
            match (all.next(), all.next()) {
                (Some((_, s)), None) => s,
                (None, _) => return Err(ApiError::new(StatusCode::NOT_FOUND, "UnknownSession", "no sessions yet")),
                _ => {
                    return Err(ApiError::bad_request(
                        "several sessions exist; pass ?session=<id>",
                    ))
                }
            }
        }
    };
    Ok(s.consolidated_so_far())
}

async fn analysis_one_way(
    State(state): State<Shared>,
    Query(q): Query<AnalysisQuery>,
) -> Result<Response, ApiError> {
    let attr: Attribute = match q.attr.as_deref() {
        Some(a) => a.parse().map_err(|e| ApiError::bad_request(format!("{e}")))?,
        None => Attribute::Ai,
    };
    let store = state.store.read().await;
    let labels = analysis_labels(&store, q.session.as_deref())?;
    Ok(Json(one_way(&labels, attr)?).into_response())
}

async fn analysis_two_way(
    State(state): State<Shared>,
    Query(q): Query<AnalysisQuery>,
) -> Result<Response, ApiError> {
    let store = state.store.read().await;
    let labels = analysis_labels(&store, q.session.as_deref())?;
    let t = two_way(&labels, Attribute::Ai, Attribute::Severity)?;
    Ok(Json(ContingencyView::new(&t)).into_response())
}
