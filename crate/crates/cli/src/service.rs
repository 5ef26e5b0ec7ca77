//! HTTP surface over one read-only store.

use std::sync::{Arc, OnceLock};
use std::time::Instant;

use axum::extract::rejection::{JsonRejection, PathRejection};
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use gpvs_core::{Embedder, Error, ScanOptions, Store};
use serde_json::json;

use crate::api::{self, ApiError, ApiSearchRequest};

pub struct AppState {
    store: OnceLock<Arc<Store>>,
    embedder: OnceLock<Arc<dyn Embedder>>,
    pub scan: ScanOptions,
    pub evidence: usize,
}

impl AppState {
    /// State with nothing loaded yet; every data endpoint answers 503.
    pub fn empty(scan: ScanOptions, evidence: usize) -> Arc<Self> {
        Arc::new(Self {
            store: OnceLock::new(),
            embedder: OnceLock::new(),
            scan,
            evidence,
        })
    }

    pub fn loaded(
        store: Store,
        embedder: Arc<dyn Embedder>,
        scan: ScanOptions,
        evidence: usize,
    ) -> Arc<Self> {
        let s = Self::empty(scan, evidence);
        s.set_store(store);
        s.set_embedder(embedder);
        s
    }

    /// First call wins; later calls are ignored.
    pub fn set_store(&self, store: Store) {
        let _ = self.store.set(Arc::new(store));
    }

    pub fn set_embedder(&self, embedder: Arc<dyn Embedder>) {
        let _ = self.embedder.set(embedder);
    }

    pub fn store(&self) -> Option<&Arc<Store>> {
        self.store.get()
    }

    pub fn embedder(&self) -> Option<&Arc<dyn Embedder>> {
        self.embedder.get()
    }
}

pub struct ApiFailure {
    status: StatusCode,
    body: ApiError,
}

impl ApiFailure {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ApiError {
                code: code.to_string(),
                message: message.into(),
            },
        }
    }

    fn store_not_loaded() -> Self {
        Self::new(
            StatusCode::SERVICE_UNAVAILABLE,
            "store_not_loaded",
            "store is still loading",
        )
    }
}

impl IntoResponse for ApiFailure {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<Error> for ApiFailure {
    fn from(e: Error) -> Self {
        let (status, code) = match &e {
            Error::InvalidInput(_) => (StatusCode::BAD_REQUEST, "invalid_input"),
            Error::UnknownGame(_) => (StatusCode::NOT_FOUND, "unknown_game"),
            Error::EmbedderUnavailable(_) => {
                (StatusCode::SERVICE_UNAVAILABLE, "embedder_unavailable")
            }
            Error::DimensionMismatch { .. } => {
                (StatusCode::INTERNAL_SERVER_ERROR, "dimension_mismatch")
            }
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        Self::new(status, code, e.to_string())
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/search", post(search))
        .route("/api/games", get(games))
        .route("/api/videos/{id}", get(video))
        .route("/healthz", get(healthz))
        .with_state(state)
}

async fn search(
    State(state): State<Arc<AppState>>,
    body: Result<Json<ApiSearchRequest>, JsonRejection>,
) -> Result<Json<api::ApiSearchResponse>, ApiFailure> {
    let Json(body) =
        body.map_err(|e| ApiFailure::new(StatusCode::BAD_REQUEST, "bad_request", e.body_text()))?;
    let req = body.into_search_request(state.evidence)?;
    let store = state
        .store()
        .cloned()
        .ok_or_else(ApiFailure::store_not_loaded)?;
    let embedder = state.embedder().cloned().ok_or_else(|| {
        ApiFailure::new(
            StatusCode::SERVICE_UNAVAILABLE,
            "embedder_unavailable",
            "embedder is not connected",
        )
    })?;
    let scan = state.scan;
    let started = Instant::now();
    let results = tokio::task::spawn_blocking(move || {
        gpvs_core::search(&req, &store, embedder.as_ref(), scan)
            .map(|ranked| api::to_api_results(&store, &ranked))
    })
    .await
    .map_err(|e| ApiFailure::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    let timing_ms = started.elapsed().as_millis() as u64;
    tracing::debug!(results = results.len(), timing_ms, "search");
    Ok(Json(api::ApiSearchResponse { results, timing_ms }))
}

async fn games(
    State(state): State<Arc<AppState>>,
) -> Result<Json<Vec<api::GameCount>>, ApiFailure> {
    let store = state.store().ok_or_else(ApiFailure::store_not_loaded)?;
    Ok(Json(api::game_counts(store)))
}

async fn video(
    State(state): State<Arc<AppState>>,
    id: Result<Path<u32>, PathRejection>,
) -> Result<Json<api::VideoDetail>, ApiFailure> {
    let Path(id) =
        id.map_err(|e| ApiFailure::new(StatusCode::BAD_REQUEST, "bad_request", e.body_text()))?;
    let store = state.store().ok_or_else(ApiFailure::store_not_loaded)?;
    api::video_detail(store, id).map(Json).ok_or_else(|| {
        ApiFailure::new(
            StatusCode::NOT_FOUND,
            "unknown_video",
            format!("no video {id}"),
        )
    })
}

async fn healthz(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    Json(json!({
        "status": "ok",
        "store_loaded": state.store().is_some(),
        "embedder_ready": state.embedder().is_some(),
    }))
}
