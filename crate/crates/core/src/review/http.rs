use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use super::{ReviewError, ReviewService, VerdictRequest};

impl IntoResponse for ReviewError {
    fn into_response(self) -> Response {
        let status = match &self {
            ReviewError::NotFound(_) => StatusCode::NOT_FOUND,
            ReviewError::AlreadyResolved(_) | ReviewError::NotAssigned { .. } | ReviewError::IncompleteQueue { .. } => {
                StatusCode::CONFLICT
            }
            ReviewError::DuplicateId(_) => StatusCode::CONFLICT,
            ReviewError::InvalidVerdict(_) | ReviewError::Mismatch(_) => StatusCode::BAD_REQUEST,
            ReviewError::Log { .. } | ReviewError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({ "error": self.to_string() }))).into_response()
    }
}

#[derive(Deserialize)]
struct NextQuery {
    reviewer: String,
}

async fn next(State(svc): State<ReviewService>, Query(q): Query<NextQuery>) -> Result<Response, ReviewError> {
    if q.reviewer.trim().is_empty() {
        return Err(ReviewError::InvalidVerdict("reviewer is empty".into()));
    }
    Ok(match svc.next_pending(&q.reviewer)? {
        Some(item) => Json(item).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    })
}

async fn verdict(State(svc): State<ReviewService>, Json(req): Json<VerdictRequest>) -> Result<Response, ReviewError> {
    Ok(Json(svc.submit_verdict(&req)?).into_response())
}

async fn stats(State(svc): State<ReviewService>) -> Response {
    Json(svc.stats()).into_response()
}

async fn entry(State(svc): State<ReviewService>, Path(id): Path<String>) -> Result<Response, ReviewError> {
    let item = svc.get(&id).ok_or(ReviewError::NotFound(id))?;
    Ok(Json(item).into_response())
}

/// JSON API used by the review frontend.
pub fn router(service: ReviewService) -> Router {
    Router::new()
        .route("/api/queue/next", get(next))
        .route("/api/verdicts", post(verdict))
        .route("/api/stats", get(stats))
        .route("/api/entries/{id}", get(entry))
        .with_state(service)
}
