//! HTTP routes. Each handler runs its engine call on the blocking pool
//! because model calls may block.

use std::sync::{Arc, Mutex, PoisonError};

use axum::extract::rejection::{JsonRejection, PathRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use persopilot_core::engine::NewUser;
use persopilot_core::labeling::TaskSpec;
use persopilot_core::Engine;
use persopilot_core::EngineError;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tower_http::cors::{Any, CorsLayer};

use crate::error::ApiError;

#[derive(Clone)]
pub struct AppState {
    engine: Arc<Mutex<Engine>>,
}

impl AppState {
    pub fn new(engine: Engine) -> Self {
        AppState { engine: Arc::new(Mutex::new(engine)) }
    }

    pub fn engine(&self) -> Arc<Mutex<Engine>> {
        Arc::clone(&self.engine)
    }

    async fn run<T, F>(&self, f: F) -> Result<T, ApiError>
    where
        T: Send + 'static,
        F: FnOnce(&mut Engine) -> Result<T, EngineError> + Send + 'static,
    {
        let engine = self.engine();
        tokio::task::spawn_blocking(move || {
            let mut guard = engine.lock().unwrap_or_else(PoisonError::into_inner);
            f(&mut guard)
        })
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map_err(ApiError::from)
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn body<T: DeserializeOwned>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ApiError::bad_request("malformed_json", e.body_text()))
}

fn path<T>(param: Result<Path<T>, PathRejection>) -> Result<T, ApiError> {
    param
        .map(|Path(v)| v)
        .map_err(|e| ApiError::bad_request("invalid_path", e.body_text()))
}

fn query<T>(params: Result<Query<T>, QueryRejection>) -> Result<T, ApiError> {
    params
        .map(|Query(v)| v)
        .map_err(|e| ApiError::bad_request("invalid_query", e.body_text()))
}

pub fn router(state: AppState) -> Router {
    let cors = CorsLayer::new().allow_origin(Any).allow_methods(Any).allow_headers(Any);
    Router::new()
        .route("/health", get(health))
        .route("/users", post(create_user))
        .route("/users/{id}", get(get_user))
        .route("/users/{id}/persona", get(get_persona))
        .route("/users/{id}/offers", get(get_offers))
        .route("/users/{id}/session", get(get_session))
        .route("/tasks", get(get_tasks))
        .route("/chat", post(chat))
        .route("/triples/{id}", delete(delete_triple))
        .route("/recommendations", get(get_recommendations))
        .route("/classification-tasks", post(create_classification_task).get(list_classification_tasks))
        .route("/classification-tasks/{id}", get(get_classification_task))
        .route("/classification-tasks/{id}/queue", get(get_queue))
        .route("/classification-tasks/{id}/labels", post(post_label))
        .route("/classification-tasks/{id}/dispatch", post(dispatch))
        .route("/classification-tasks/{id}/stats", get(get_stats))
        .route("/classification-tasks/{id}/classify-random", post(classify_random))
        .route("/offers/{id}/respond", post(respond_offer))
        .fallback(not_found)
        .method_not_allowed_fallback(method_not_allowed)
        .layer(cors)
        .with_state(state)
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

async fn method_not_allowed() -> ApiError {
    ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "method_not_allowed", "method not supported on this endpoint")
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn create_user(
    State(state): State<AppState>,
    payload: Result<Json<NewUser>, JsonRejection>,
) -> Result<(StatusCode, Json<impl Serialize>), ApiError> {
    let new = body(payload)?;
    let user = state.run(move |e| e.create_user(new)).await?;
    Ok((StatusCode::CREATED, Json(user)))
}

async fn get_user(State(state): State<AppState>, id: Result<Path<String>, PathRejection>) -> ApiResult<impl Serialize> {
    let id = path(id)?;
    state.run(move |e| e.user(&id)).await.map(Json)
}

#[derive(Deserialize)]
struct PersonaQuery {
    task: Option<String>,
}

async fn get_persona(
    State(state): State<AppState>,
    id: Result<Path<String>, PathRejection>,
    params: Result<Query<PersonaQuery>, QueryRejection>,
) -> ApiResult<impl Serialize> {
    let id = path(id)?;
    let task = query(params)?.task;
    state.run(move |e| e.persona(&id, task.as_deref())).await.map(Json)
}

async fn get_offers(State(state): State<AppState>, id: Result<Path<String>, PathRejection>) -> ApiResult<impl Serialize> {
    let id = path(id)?;
    state.run(move |e| e.user_offers(&id)).await.map(Json)
}

#[derive(Deserialize)]
struct SessionQuery {
    task: String,
}

async fn get_session(
    State(state): State<AppState>,
    id: Result<Path<String>, PathRejection>,
    params: Result<Query<SessionQuery>, QueryRejection>,
) -> ApiResult<impl Serialize> {
    let id = path(id)?;
    let task = query(params)?.task;
    state
        .run(move |e| {
            e.user(&id)?;
            Ok(e.session(&id, &task).to_vec())
        })
        .await
        .map(Json)
}

async fn get_tasks(State(state): State<AppState>) -> ApiResult<impl Serialize> {
    state.run(|e| Ok(e.tasks().to_vec())).await.map(Json)
}

#[derive(Deserialize)]
struct ChatBody {
    user_id: String,
    task_id: String,
    message: String,
}

async fn chat(State(state): State<AppState>, payload: Result<Json<ChatBody>, JsonRejection>) -> ApiResult<impl Serialize> {
    let req = body(payload)?;
    state
        .run(move |e| e.chat(&req.user_id, &req.task_id, &req.message))
        .await
        .map(Json)
}

async fn delete_triple(State(state): State<AppState>, id: Result<Path<u64>, PathRejection>) -> ApiResult<impl Serialize> {
    let id = path(id)?;
    state.run(move |e| e.delete_triple(id)).await.map(Json)
}

#[derive(Deserialize)]
struct RecommendationQuery {
    user_id: String,
    task_id: String,
    topic_id: Option<String>,
    k: Option<usize>,
}

async fn get_recommendations(
    State(state): State<AppState>,
    params: Result<Query<RecommendationQuery>, QueryRejection>,
) -> ApiResult<impl Serialize> {
    let q = query(params)?;
    state
        .run(move |e| e.recommendations(&q.user_id, &q.task_id, q.topic_id.as_deref(), q.k))
        .await
        .map(Json)
}

async fn create_classification_task(
    State(state): State<AppState>,
    payload: Result<Json<TaskSpec>, JsonRejection>,
) -> Result<(StatusCode, Json<impl Serialize>), ApiError> {
    let spec = body(payload)?;
    let task = state.run(move |e| e.create_classification_task(spec)).await?;
    Ok((StatusCode::CREATED, Json(task)))
}

async fn list_classification_tasks(State(state): State<AppState>) -> ApiResult<impl Serialize> {
    state.run(|e| Ok(e.classification_tasks())).await.map(Json)
}

async fn get_classification_task(
    State(state): State<AppState>,
    id: Result<Path<String>, PathRejection>,
) -> ApiResult<impl Serialize> {
    let id = path(id)?;
    state.run(move |e| e.get_classification_task(&id)).await.map(Json)
}

async fn get_queue(State(state): State<AppState>, id: Result<Path<String>, PathRejection>) -> ApiResult<impl Serialize> {
    let id = path(id)?;
    state.run(move |e| e.labeling_queue(&id)).await.map(Json)
}

#[derive(Deserialize)]
struct LabelBody {
    user_id: String,
    label: String,
}

async fn post_label(
    State(state): State<AppState>,
    id: Result<Path<String>, PathRejection>,
    payload: Result<Json<LabelBody>, JsonRejection>,
) -> ApiResult<impl Serialize> {
    let id = path(id)?;
    let req = body(payload)?;
    state
        .run(move |e| e.confirm_label(&id, &req.user_id, &req.label))
        .await
        .map(Json)
}

async fn dispatch(State(state): State<AppState>, id: Result<Path<String>, PathRejection>) -> ApiResult<impl Serialize> {
    let id = path(id)?;
    state.run(move |e| e.dispatch(&id)).await.map(Json)
}

async fn get_stats(State(state): State<AppState>, id: Result<Path<String>, PathRejection>) -> ApiResult<impl Serialize> {
    let id = path(id)?;
    state.run(move |e| e.stats(&id)).await.map(Json)
}

async fn classify_random(
    State(state): State<AppState>,
    id: Result<Path<String>, PathRejection>,
) -> ApiResult<impl Serialize> {
    let id = path(id)?;
    state.run(move |e| e.classify_random(&id)).await.map(Json)
}

#[derive(Deserialize)]
struct RespondBody {
    accepted: bool,
}

async fn respond_offer(
    State(state): State<AppState>,
    id: Result<Path<String>, PathRejection>,
    payload: Result<Json<RespondBody>, JsonRejection>,
) -> ApiResult<impl Serialize> {
    let id = path(id)?;
    let req = body(payload)?;
    state.run(move |e| e.respond_offer(&id, req.accepted)).await.map(Json)
}
