//! Read-only HTTP service over built indexes: POST /verify,
//! GET /provenance/{id}, GET /healthz.

use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Json, Response};
use axum::routing::{get, post};
use axum::Router;
use serde_json::json;

use crate::config::EngineConfig;
use crate::lake::{DataLake, DataObject};
use crate::provenance::{ProvenanceError, ProvenanceLog};
use crate::verify::{verify_object, Indexes};

pub struct AppState {
    pub lake: DataLake,
    pub indexes: Indexes,
    pub config: EngineConfig,
    pub log: Option<ProvenanceLog>,
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/verify", post(handle_verify))
        .route("/provenance/:id", get(handle_provenance))
        .route("/healthz", get(|| async { "ok" }))
        .with_state(state)
}

async fn handle_verify(
    State(state): State<Arc<AppState>>,
    body: String,
) -> Response {
    let object: DataObject = match serde_json::from_str(&body) {
        Ok(o) => o,
        Err(e) => {
            return (
                StatusCode::BAD_REQUEST,
                Json(json!({ "error": format!("malformed data object: {e}") })),
            )
                .into_response()
        }
    };
    // the pipeline is blocking CPU work; keep the runtime free
    let result = tokio::task::spawn_blocking(move || {
        let report = verify_object(&object, &state.lake, &state.indexes, &state.config);
        if let Some(log) = &state.log {
            // a failed provenance write annotates the report, the verdict stands
            if let Err(e) = log.record(&report) {
                let mut report = report;
                report.errors.push(crate::verify::StageError {
                    stage: "provenance".into(),
                    message: e.to_string(),
                });
                return report;
            }
        }
        report
    })
    .await;
    match result {
        Ok(report) => Json(report).into_response(),
        Err(e) => (
            StatusCode::SERVICE_UNAVAILABLE,
            Json(json!({ "error": format!("engine failure: {e}") })),
        )
            .into_response(),
    }
}

async fn handle_provenance(
    State(state): State<Arc<AppState>>,
    Path(id): Path<u64>,
) -> Response {
    let Some(log) = &state.log else {
        return (
            StatusCode::NOT_FOUND,
            Json(json!({ "error": "no provenance log configured" })),
        )
            .into_response();
    };
    match log.load(id) {
        Ok(report) => Json(report).into_response(),
        Err(ProvenanceError::NotFound(_)) => (
            StatusCode::NOT_FOUND,
            Json(json!({ "error": format!("lineage id {id} not found") })),
        )
            .into_response(),
        Err(e) => (
            StatusCode::SERVICE_UNAVAILABLE,
            Json(json!({ "error": e.to_string() })),
        )
            .into_response(),
    }
}

/// Serves until interrupted.
pub async fn run(state: Arc<AppState>, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
