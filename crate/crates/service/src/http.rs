//! The `/api/v1` HTTP interface.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::JsonRejection;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use memovis_core::viewpoint::SamplingConfig;
use memovis_core::Viewpoint;
use serde::Deserialize;
use serde_json::json;
use tower_http::services::ServeDir;

use crate::app::{Service, SuggestRequest};
use crate::error::ServiceError;
use crate::ops::ModifierRequest;

type Shared = State<Arc<Service>>;
type ApiResult<T> = Result<T, ServiceError>;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match &self {
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Validation(_) => StatusCode::BAD_REQUEST,
            ServiceError::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Conflict(_) | ServiceError::IndexNotReady | ServiceError::Superseded => {
                StatusCode::CONFLICT
            }
            ServiceError::Config(_) | ServiceError::Io { .. } | ServiceError::Internal(_) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        };
        if status.is_server_error() {
            tracing::error!("{self}");
        }
        (status, Json(json!({"error": self.code(), "message": self.to_string()}))).into_response()
    }
}

/// JSON body whose parse failures come back as validation errors.
struct Body<T>(T);

impl<T, S> axum::extract::FromRequest<S> for Body<T>
where
    Json<T>: axum::extract::FromRequest<S, Rejection = JsonRejection>,
    S: Send + Sync,
{
    type Rejection = ServiceError;

    async fn from_request(req: axum::extract::Request, state: &S) -> Result<Self, Self::Rejection> {
        Json::<T>::from_request(req, state)
            .await
            .map(|Json(v)| Body(v))
            .map_err(|e| ServiceError::Validation(e.body_text()))
    }
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> ApiResult<T> + Send + 'static,
) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Internal(format!("worker task failed: {e}")))?
}

pub fn router(service: Arc<Service>) -> Router {
    let limit = service.config().max_upload_mb * 1024 * 1024;
    let ui = service.config().ui_dir.clone();
    let api = Router::new()
        .route("/health", get(health))
        .route("/projects", post(create_project).get(list_projects))
        .route("/projects/{id}", get(get_project))
        .route("/projects/{id}/scene", get(get_scene))
        .route("/projects/{id}/index", post(start_index))
        .route("/projects/{id}/comments", post(create_comment).get(list_comments))
        .route("/jobs/{id}", get(get_job))
        .route("/comments/{id}", get(get_comment).put(edit_comment))
        .route("/comments/{id}/anchor", put(anchor_comment))
        .route("/comments/{id}/suggest", post(suggest))
        .route("/comments/{id}/modifiers", post(submit_modifier))
        .route("/comments/{id}/export", get(export_memo))
        .route("/comments/{id}/attachments/{job}/{file}", get(attachment_file))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(service);
    let app = Router::new().nest("/api/v1", api);
    match ui {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({"status": "ok", "version": env!("CARGO_PKG_VERSION")}))
}

async fn create_project(State(s): Shared, body: Bytes) -> ApiResult<impl IntoResponse> {
    if body.is_empty() {
        return Err(ServiceError::Validation("request body must be a .glb or .gltf file".into()));
    }
    let project = blocking(move || s.create_project(&body)).await?;
    Ok((StatusCode::CREATED, Json(project)))
}

async fn list_projects(State(s): Shared) -> impl IntoResponse {
    Json(s.store().projects())
}

async fn get_project(State(s): Shared, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(s.store().project(&id)?))
}

async fn get_scene(State(s): Shared, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let path = s.store().scene_path(&id)?;
    let bytes = tokio::fs::read(&path)
        .await
        .map_err(|e| ServiceError::io(&path, e))?;
    let mime = if path.extension().is_some_and(|e| e == "glb") {
        "model/gltf-binary"
    } else {
        "model/gltf+json"
    };
    Ok(([(header::CONTENT_TYPE, mime)], bytes))
}

async fn start_index(State(s): Shared, Path(id): Path<String>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let sampling: Option<SamplingConfig> = if body.iter().all(u8::is_ascii_whitespace) {
        None
    } else {
        Some(serde_json::from_slice(&body).map_err(|e| ServiceError::Validation(format!("sampling config: {e}")))?)
    };
    let job = s.start_index_build(&id, sampling)?;
    Ok((StatusCode::ACCEPTED, Json(job)))
}

async fn get_job(State(s): Shared, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(s.store().job(&id)?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CommentBody {
    #[serde(default)]
    body: String,
}

async fn create_comment(
    State(s): Shared,
    Path(id): Path<String>,
    Body(req): Body<CommentBody>,
) -> ApiResult<impl IntoResponse> {
    Ok((StatusCode::CREATED, Json(s.create_comment(&id, &req.body)?)))
}

async fn list_comments(State(s): Shared, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(s.store().comments(&id)?))
}

async fn get_comment(State(s): Shared, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(s.store().comment(&id)?))
}

async fn edit_comment(
    State(s): Shared,
    Path(id): Path<String>,
    Body(req): Body<CommentBody>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(s.edit_comment(&id, &req.body)?))
}

async fn anchor_comment(
    State(s): Shared,
    Path(id): Path<String>,
    Body(v): Body<Viewpoint>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(s.anchor(&id, v)?))
}

async fn suggest(
    State(s): Shared,
    Path(id): Path<String>,
    Body(req): Body<SuggestRequest>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(move || s.suggest(&id, &req)).await?))
}

async fn submit_modifier(
    State(s): Shared,
    Path(id): Path<String>,
    Body(req): Body<serde_json::Value>,
) -> ApiResult<impl IntoResponse> {
    let request: ModifierRequest =
        serde_json::from_value(req).map_err(|e| ServiceError::Validation(format!("modifier request: {e}")))?;
    let job = blocking(move || s.submit_modifier(&id, request)).await?;
    Ok((StatusCode::ACCEPTED, Json(job)))
}

async fn export_memo(State(s): Shared, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let name = format!("attachment; filename=\"memo-{id}.zip\"");
    let bytes = blocking(move || s.export_memo(&id)).await?;
    Ok((
        [
            (header::CONTENT_TYPE, "application/zip".to_string()),
            (header::CONTENT_DISPOSITION, name),
        ],
        bytes,
    ))
}

async fn attachment_file(
    State(s): Shared,
    Path((id, job, file)): Path<(String, String, String)>,
) -> ApiResult<impl IntoResponse> {
    let mime = if file.ends_with(".png") {
        "image/png"
    } else {
        "application/json"
    };
    let bytes = blocking(move || s.store().result_file(&id, &job, &file)).await?;
    Ok(([(header::CONTENT_TYPE, mime)], bytes))
}
