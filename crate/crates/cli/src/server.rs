//! HTTP JSON front end of the study service.

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use streetclear::study::{StudyError, StudyPlan, StudyService, SummaryOptions, SystemClock, TrialSubmission};

use crate::cli::ServeArgs;

type Shared = Arc<StudyService>;

struct ApiError(StudyError);

impl From<StudyError> for ApiError {
    fn from(e: StudyError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        use StudyError::{
            BadToken, ClockSkew, CorruptLog, DuplicateTrial, DuplicateVolunteer, InsufficientData, InvalidPlan, Io,
            NonPositiveBaseline, NotCrossover, NotNormalizable, UnassignedPair, UnknownDataset, UnknownGroup,
            UnknownSession, UnknownStudy,
        };
        let (status, kind) = match &self.0 {
            UnknownStudy(_) => (StatusCode::NOT_FOUND, "unknown_study"),
            UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown_session"),
            DuplicateTrial { .. } => (StatusCode::CONFLICT, "duplicate_trial"),
            DuplicateVolunteer(_) => (StatusCode::CONFLICT, "duplicate_volunteer"),
            BadToken(_) => (StatusCode::CONFLICT, "bad_token"),
            ClockSkew { .. } => (StatusCode::CONFLICT, "clock_skew"),
            UnassignedPair(_) => (StatusCode::BAD_REQUEST, "unassigned_pair"),
            InvalidPlan(_) | NotCrossover(_) | UnknownGroup(_) | UnknownDataset(_) => {
                (StatusCode::BAD_REQUEST, "invalid_request")
            }
            InsufficientData(_) | NotNormalizable(_) | NonPositiveBaseline(_) => {
                (StatusCode::UNPROCESSABLE_ENTITY, "insufficient_data")
            }
            CorruptLog { .. } | Io(_) | StudyError::Json(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        if status.is_server_error() {
            log::error!("{}", self.0);
        }
        (status, Json(json!({"error": self.0.to_string(), "kind": kind}))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Runs blocking service work (fsync, file reads) off the async workers.
async fn blocking<T, F>(svc: &Shared, f: F) -> ApiResult<T>
where
    F: FnOnce(&StudyService) -> Result<T, StudyError> + Send + 'static,
    T: Send + 'static,
{
    let svc = svc.clone();
    tokio::task::spawn_blocking(move || f(&svc))
        .await
        .map_err(|e| ApiError(StudyError::Io(std::io::Error::other(e))))?
        .map_err(ApiError)
}

async fn create_study(State(svc): State<Shared>, Json(plan): Json<StudyPlan>) -> ApiResult<impl IntoResponse> {
    let id = blocking(&svc, move |s| s.create_study(plan)).await?;
    Ok((StatusCode::CREATED, Json(json!({"study_id": id}))))
}

async fn list_studies(State(svc): State<Shared>) -> impl IntoResponse {
    Json(json!({"studies": svc.study_ids()}))
}

async fn get_plan(State(svc): State<Shared>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(svc.plan(&id)?))
}

#[derive(Deserialize)]
struct OpenSession {
    volunteer_id: String,
    group: String,
}

async fn open_session(
    State(svc): State<Shared>,
    Path(id): Path<String>,
    Json(body): Json<OpenSession>,
) -> ApiResult<impl IntoResponse> {
    let info = blocking(&svc, move |s| s.open_session(&id, &body.volunteer_id, &body.group)).await?;
    Ok((StatusCode::CREATED, Json(info)))
}

async fn session_info(State(svc): State<Shared>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(svc.session_info(&id)?))
}

async fn next_trial(State(svc): State<Shared>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(match svc.next_trial(&id)? {
        Some(next) => Json(next).into_response(),
        None => Json(json!({"done": true})).into_response(),
    })
}

async fn submit_trial(
    State(svc): State<Shared>,
    Path(id): Path<String>,
    Json(sub): Json<TrialSubmission>,
) -> ApiResult<impl IntoResponse> {
    let record = blocking(&svc, move |s| s.record_trial(&id, sub)).await?;
    Ok((StatusCode::CREATED, Json(record)))
}

#[derive(Deserialize)]
struct ReportQuery {
    #[serde(default)]
    only_hits: bool,
}

async fn report(
    State(svc): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<ReportQuery>,
) -> ApiResult<impl IntoResponse> {
    let summary = svc.report(&id, SummaryOptions { only_hits: q.only_hits })?;
    Ok(Json(summary))
}

async fn records(State(svc): State<Shared>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(svc.records(&id)?.as_ref().clone()))
}

fn content_type(path: &std::path::Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("webp") => "image/webp",
        _ => "application/octet-stream",
    }
}

async fn file_response(path: PathBuf) -> Response {
    match tokio::fs::read(&path).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type(&path))], Body::from(bytes)).into_response(),
        Err(_) => (StatusCode::NOT_FOUND, Json(json!({"error": "image not found", "kind": "not_found"}))).into_response(),
    }
}

/// Serves the pending trial's image and stamps its delivery time.
async fn trial_image(State(svc): State<Shared>, Path((id, token)): Path<(String, String)>) -> ApiResult<Response> {
    let path = svc.deliver_image(&id, &token)?;
    Ok(file_response(path).await)
}

async fn static_image(State(svc): State<Shared>, Path(rel): Path<String>) -> ApiResult<Response> {
    let path = svc.resolve_image(&rel)?;
    Ok(file_response(path).await)
}

pub fn router(svc: Shared) -> Router {
    Router::new()
        .route("/studies", post(create_study).get(list_studies))
        .route("/studies/{id}", get(get_plan))
        .route("/studies/{id}/sessions", post(open_session))
        .route("/studies/{id}/report", get(report))
        .route("/studies/{id}/records", get(records))
        .route("/sessions/{id}", get(session_info))
        .route("/sessions/{id}/next", get(next_trial))
        .route("/sessions/{id}/trials", post(submit_trial))
        .route("/sessions/{id}/image/{token}", get(trial_image))
        .route("/images/{*path}", get(static_image))
        .with_state(svc)
}

pub fn serve(args: &ServeArgs) -> anyhow::Result<()> {
    let images = args.images.clone().unwrap_or_else(|| args.data_dir.join("images"));
    let svc = Arc::new(StudyService::open(&args.data_dir, images, Arc::new(SystemClock))?);
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(args.addr).await?;
        let addr = listener.local_addr()?;
        log::info!("listening on {addr}");
        crate::fsutil::write_json_line(&json!({"listening": addr.to_string()}))?;
        axum::serve(listener, router(svc))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}
