//! HTTP routes. Field names are documented in `docs/api.md`.

use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chance_utility::elicitation::{
    compute_session_utilities, GambleSpec, NextGamble, Progress, Session, SessionError, SessionMode, SessionPlan,
};
use chance_utility::estimation::{EstimationConfig, EstimationMethod};
use chance_utility::UtilityPoint;
use serde::{Deserialize, Serialize};

use crate::store::{SessionStore, StoreError};

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorBody { error: &self.message })).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match &e {
            StoreError::NotFound(_) => StatusCode::NOT_FOUND,
            StoreError::Session(s) => return s.into(),
            StoreError::Io(_) | StoreError::Corrupt { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

impl From<&SessionError> for ApiError {
    fn from(e: &SessionError) -> Self {
        let status = match e {
            SessionError::InvalidPlan(_) | SessionError::Estimation { .. } | SessionError::Consistency(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            SessionError::UnknownGamble(_) => StatusCode::NOT_FOUND,
            SessionError::AlreadyAnswered(_) | SessionError::NotReady(_) => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::new(e.status(), e.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.body_text())
    }
}

type AppState = Arc<SessionStore>;

/// Runs blocking store or estimation work off the async workers.
async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("worker failed: {e}")))?
}

pub fn router(store: Arc<SessionStore>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(export_session))
        .route("/sessions/{id}/next", get(next_gamble))
        .route("/sessions/{id}/answers", post(post_answer))
        .route("/sessions/{id}/utility", get(utility))
        .with_state(store)
}

#[derive(Deserialize)]
pub struct CreateRequest {
    #[serde(flatten)]
    pub plan: SessionPlan,
    #[serde(default)]
    pub client_token: Option<String>,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum NextResponse {
    Gamble { gamble: GambleSpec, progress: Progress },
    Complete { progress: Progress, utility: UtilityResponse },
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct CreateResponse {
    pub session_id: String,
    pub created: bool,
    pub mode: SessionMode,
    pub next: NextResponse,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct AnswerResponse {
    pub gamble_id: String,
    pub y: u8,
    pub progress: Progress,
    pub complete: bool,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct UtilityResponse {
    pub session_id: String,
    pub method: EstimationMethod,
    pub isotonic: bool,
    pub progress: Progress,
    pub points: Vec<UtilityPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn utility_of(session: &Session, method: EstimationMethod, isotonic: bool) -> Result<UtilityResponse, ApiError> {
    let config = EstimationConfig { method, ..session.plan.bootstrap };
    let points = compute_session_utilities(session, &config, isotonic).map_err(|e| ApiError::from(&e))?;
    let note = points.is_empty().then(|| "no answers recorded yet; the curve fills in as choices arrive".to_string());
    Ok(UtilityResponse { session_id: session.id.clone(), method, isotonic, progress: session.progress(), points, note })
}

fn next_of(store: &SessionStore, id: &str) -> Result<NextResponse, ApiError> {
    let next = store.update(id, |s| Ok((s.next_gamble()?, s.progress())))?;
    match next {
        (NextGamble::Gamble(gamble), progress) => Ok(NextResponse::Gamble { gamble, progress }),
        (NextGamble::Complete, progress) => {
            let session = store.get(id)?;
            let utility = utility_of(&session, session.plan.bootstrap.method, false)?;
            Ok(NextResponse::Complete { progress, utility })
        }
    }
}

async fn create_session(
    State(store): State<AppState>,
    body: Result<Json<CreateRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<CreateResponse>), ApiError> {
    let Json(req) = body?;
    blocking(move || {
        let (session, created) = store.create(req.plan, req.client_token)?;
        let next = next_of(&store, &session.id)?;
        let status = if created { StatusCode::CREATED } else { StatusCode::OK };
        Ok((status, Json(CreateResponse { session_id: session.id.clone(), created, mode: session.plan.mode, next })))
    })
    .await
}

async fn next_gamble(State(store): State<AppState>, Path(id): Path<String>) -> Result<Json<NextResponse>, ApiError> {
    blocking(move || next_of(&store, &id).map(Json)).await
}

#[derive(Deserialize)]
pub struct AnswerRequest {
    pub gamble_id: String,
    pub y: i64,
}

async fn post_answer(
    State(store): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<AnswerRequest>, JsonRejection>,
) -> Result<Json<AnswerResponse>, ApiError> {
    let Json(req) = body?;
    let y = match req.y {
        0 => false,
        1 => true,
        other => return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, format!("y must be 0 or 1, got {other}"))),
    };
    blocking(move || {
        if store.get(&id)?.is_complete() {
            return Err(ApiError::new(StatusCode::CONFLICT, format!("session {id} is complete")));
        }
        let progress = store.update(&id, |s| {
            s.record_choice(&req.gamble_id, y)?;
            Ok(s.progress())
        })?;
        Ok(Json(AnswerResponse {
            gamble_id: req.gamble_id,
            y: u8::from(y),
            complete: progress.answered == progress.total,
            progress,
        }))
    })
    .await
}

#[derive(Deserialize)]
pub struct UtilityQuery {
    #[serde(default)]
    pub method: EstimationMethod,
    #[serde(default)]
    pub isotonic: bool,
}

async fn utility(
    State(store): State<AppState>,
    Path(id): Path<String>,
    query: Result<Query<UtilityQuery>, QueryRejection>,
) -> Result<Json<UtilityResponse>, ApiError> {
    let Query(q) = query?;
    blocking(move || {
        let session = store.get(&id)?;
        utility_of(&session, q.method, q.isotonic).map(Json)
    })
    .await
}

async fn export_session(State(store): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let session = store.get(&id)?;
    let text = session.to_json().map_err(|e| ApiError::from(&e))?;
    Ok(([(header::CONTENT_TYPE, "application/json")], text).into_response())
}
