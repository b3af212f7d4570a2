//! HTTP handlers. Every `/api` route except health requires a bearer token.

use std::time::Instant;

use aclrag::agent::{AgentError, AgentRun, Node, Source};
use aclrag::gateway::ChatMessage;
use aclrag::repository::{MediaKind, MetadataPatch, NewRecord, RepoError};
use aclrag::retrieval::{SearchError, SearchParams, SearchResponse};
use aclrag::{RecordId, UserId};
use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequestParts, Path, Query, Request, State};
use axum::http::request::Parts;
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::app::AppState;

/// Error response: a status and a short message, nothing else.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn unauthorized() -> Self {
        Self::new(StatusCode::UNAUTHORIZED, "unauthorized")
    }

    fn internal(message: impl std::fmt::Display) -> Self {
        tracing::error!(%message, "internal error");
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal error")
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

impl From<RepoError> for ApiError {
    fn from(e: RepoError) -> Self {
        let status = match &e {
            RepoError::NotFound => StatusCode::NOT_FOUND,
            RepoError::Forbidden => StatusCode::FORBIDDEN,
            RepoError::UnknownUser(_) => StatusCode::UNAUTHORIZED,
            RepoError::DuplicateIdentifier(_) => StatusCode::CONFLICT,
            RepoError::DuplicateUser(_) | RepoError::DuplicateToken => StatusCode::CONFLICT,
            _ => StatusCode::BAD_REQUEST,
        };
        if status == StatusCode::UNAUTHORIZED {
            return Self::unauthorized();
        }
        Self::new(status, e.to_string())
    }
}

impl From<SearchError> for ApiError {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::EmptyQuery | SearchError::InvalidParams { .. } => Self::bad_request(e.to_string()),
            SearchError::EmbedderUnavailable(_) => Self::new(StatusCode::SERVICE_UNAVAILABLE, e.to_string()),
            SearchError::Repository(r) => r.into(),
            SearchError::Index(i) => Self::internal(i),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::bad_request(e.body_text())
    }
}

/// The user behind a valid bearer token.
pub struct AuthUser(pub UserId);

fn bearer(parts: &Parts) -> Option<&str> {
    let value = parts.headers.get(header::AUTHORIZATION)?.to_str().ok()?;
    let (scheme, token) = value.split_once(' ')?;
    scheme.eq_ignore_ascii_case("bearer").then(|| token.trim()).filter(|t| !t.is_empty())
}

impl FromRequestParts<AppState> for AuthUser {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, ApiError> {
        bearer(parts)
            .and_then(|t| state.repo.user_by_token(t))
            .map(|u| AuthUser(u.user_id))
            .ok_or_else(ApiError::unauthorized)
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(ApiError::internal)
}

/// One structured line per request.
async fn log_requests(State(state): State<AppState>, req: Request, next: Next) -> Response {
    let start = Instant::now();
    let method = req.method().clone();
    let path = req.uri().path().to_owned();
    let (parts, body) = req.into_parts();
    let user = bearer(&parts)
        .and_then(|t| state.repo.user_by_token(t))
        .map_or_else(|| "-".to_owned(), |u| u.user_id.0);
    let resp = next.run(Request::from_parts(parts, body)).await;
    tracing::info!(
        target: "aclrag::request",
        method = %method,
        path = %path,
        user = %user,
        status = resp.status().as_u16(),
        duration_ms = start.elapsed().as_secs_f64() * 1e3,
        "request"
    );
    resp
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/search", post(search))
        .route("/api/chat", post(chat))
        .route("/api/records", get(list_records).post(create_record))
        .route("/api/records/{id}", get(get_record).patch(update_record).delete(delete_record))
        .route("/api/records/{id}/files", post(upload_file))
        .route("/api/records/{id}/files/{name}", delete(delete_file))
        .route("/api/records/{id}/links", get(links))
        .route("/api/sync/status", get(sync_status))
        .layer(middleware::from_fn_with_state(state.clone(), log_requests))
        .with_state(state)
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

#[derive(Debug, Deserialize)]
pub struct SearchBody {
    pub query: String,
    pub k: Option<usize>,
    pub n: Option<usize>,
}

async fn search(
    State(state): State<AppState>,
    AuthUser(user): AuthUser,
    body: Result<Json<SearchBody>, JsonRejection>,
) -> Result<Json<SearchResponse>, ApiError> {
    let Json(body) = body?;
    let d = state.config.search;
    let params = SearchParams { query: body.query, k: body.k.unwrap_or(d.k), n: body.n.unwrap_or(d.n) };
    if params.k > 1000 {
        return Err(ApiError::bad_request("k must be at most 1000"));
    }
    let resp = blocking(move || state.retriever.semantic_search(&params, &user)).await??;
    Ok(Json(resp))
}

#[derive(Debug, Deserialize)]
pub struct ChatBody {
    pub messages: Vec<ChatMessage>,
}

#[derive(Debug, Default, Deserialize)]
pub struct DebugQuery {
    pub debug: Option<String>,
}

impl DebugQuery {
    fn enabled(&self) -> bool {
        matches!(self.debug.as_deref(), Some("1" | "true" | "yes"))
    }
}

#[derive(Debug, Serialize)]
pub struct ChatTrace {
    pub messages: Vec<ChatMessage>,
    pub tool_calls_used: usize,
    pub json_retries_used: usize,
    pub model_calls: usize,
    pub nodes: Vec<Node>,
}

#[derive(Debug, Serialize)]
pub struct ChatReply {
    pub answer: String,
    pub sources: Vec<Source>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<ChatTrace>,
}

fn reply(run: AgentRun, error: Option<String>, debug: bool, state: &AppState, user: &UserId) -> ChatReply {
    let mut sources = run.answer.sources.clone();
    // A model may cite ids it never saw; only readable records are passed on.
    sources.retain(|s| state.repo.can_read(user, s.record_id));
    let trace = debug.then(|| ChatTrace {
        messages: run.trace,
        tool_calls_used: run.tool_calls_used,
        json_retries_used: run.json_retries_used,
        model_calls: run.model_calls,
        nodes: run.nodes,
    });
    ChatReply { answer: run.answer.answer, sources, error, trace }
}

async fn chat(
    State(state): State<AppState>,
    AuthUser(user): AuthUser,
    Query(q): Query<DebugQuery>,
    body: Result<Json<ChatBody>, JsonRejection>,
) -> Result<Json<ChatReply>, ApiError> {
    let Json(body) = body?;
    let debug = q.enabled();
    let st = state.clone();
    let u = user.clone();
    let result = blocking(move || st.agent.run_agent(&body.messages, &u, &st.config.instance_url)).await?;
    match result {
        Ok(run) => Ok(Json(reply(run, None, debug, &state, &user))),
        Err(AgentError::AnswerFormatExhausted { reason, run }) => {
            Ok(Json(reply(*run, Some(format!("answer format exhausted: {reason}")), debug, &state, &user)))
        }
        Err(e @ AgentError::InvalidHistory(_)) => Err(ApiError::bad_request(e.to_string())),
        Err(e @ AgentError::LlmUnavailable(_)) => Err(ApiError::new(StatusCode::BAD_GATEWAY, e.to_string())),
    }
}

async fn list_records(State(state): State<AppState>, AuthUser(user): AuthUser) -> Result<Response, ApiError> {
    Ok(Json(state.repo.list_records(&user)?).into_response())
}

#[derive(Debug, Deserialize)]
pub struct CreateRecordBody {
    pub identifier: String,
    pub title: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub extras: Map<String, Value>,
}

async fn create_record(
    State(state): State<AppState>,
    AuthUser(user): AuthUser,
    body: Result<Json<CreateRecordBody>, JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(b) = body?;
    let new = NewRecord { identifier: b.identifier, title: b.title, description: b.description, extras: b.extras };
    let record = state.repo.create_record(new, &user)?;
    Ok((StatusCode::CREATED, Json(record)).into_response())
}

async fn get_record(
    State(state): State<AppState>,
    AuthUser(user): AuthUser,
    Path(id): Path<u64>,
) -> Result<Response, ApiError> {
    Ok(Json(state.repo.get_record(RecordId(id), &user)?).into_response())
}

#[derive(Debug, Deserialize)]
pub struct PatchRecordBody {
    pub title: Option<String>,
    pub description: Option<String>,
    pub extras: Option<Map<String, Value>>,
}

async fn update_record(
    State(state): State<AppState>,
    AuthUser(user): AuthUser,
    Path(id): Path<u64>,
    body: Result<Json<PatchRecordBody>, JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(b) = body?;
    let patch = MetadataPatch { title: b.title, description: b.description, extras: b.extras };
    Ok(Json(state.repo.update_metadata(RecordId(id), patch, &user)?).into_response())
}

async fn delete_record(
    State(state): State<AppState>,
    AuthUser(user): AuthUser,
    Path(id): Path<u64>,
) -> Result<StatusCode, ApiError> {
    state.repo.delete_record(RecordId(id), &user)?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Debug, Deserialize)]
pub struct UploadBody {
    pub name: String,
    pub media_kind: MediaKind,
    /// UTF-8 content; mutually exclusive with `content_base64`.
    pub content: Option<String>,
    pub content_base64: Option<String>,
}

async fn upload_file(
    State(state): State<AppState>,
    AuthUser(user): AuthUser,
    Path(id): Path<u64>,
    body: Result<Json<UploadBody>, JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(b) = body?;
    let bytes = match (b.content, b.content_base64) {
        (Some(text), None) => text.into_bytes(),
        (None, Some(encoded)) => base64::engine::general_purpose::STANDARD
            .decode(encoded.trim())
            .map_err(|e| ApiError::bad_request(format!("content_base64: {e}")))?,
        _ => return Err(ApiError::bad_request("give exactly one of content and content_base64")),
    };
    let entry = state.repo.upload_file(RecordId(id), &b.name, b.media_kind, bytes, &user)?;
    Ok((StatusCode::CREATED, Json(entry)).into_response())
}

async fn delete_file(
    State(state): State<AppState>,
    AuthUser(user): AuthUser,
    Path((id, name)): Path<(u64, String)>,
) -> Result<StatusCode, ApiError> {
    state.repo.delete_file(RecordId(id), &name, &user)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn links(
    State(state): State<AppState>,
    AuthUser(user): AuthUser,
    Path(id): Path<u64>,
) -> Result<Response, ApiError> {
    Ok(Json(state.repo.get_connections(id, "record", &user)?).into_response())
}

/// Queue counters are global; per-record details are limited to records the
/// caller can read.
async fn sync_status(State(state): State<AppState>, AuthUser(user): AuthUser) -> Json<Value> {
    let mut status = state.queue.status();
    status.failed.retain(|f| state.repo.can_read(&user, f.event.record_id));
    status.last_sequence_per_record.retain(|r, _| state.repo.can_read(&user, *r));
    let idle = status.queued == 0 && status.in_flight == 0;
    let mut v = serde_json::to_value(&status).unwrap_or_default();
    v["idle"] = json!(idle);
    v["chunks"] = json!(state.table.len());
    Json(v)
}
