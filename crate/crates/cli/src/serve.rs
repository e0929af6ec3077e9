use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use coqex_core::error::ErrorKind;
use coqex_core::{Engine, Passage};
use serde::Deserialize;

use crate::commands::{render_package, CliError, Stage};

struct AppState {
    engine: Engine,
    fixtures: BTreeMap<String, Vec<Passage>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnswerRequest {
    query: String,
    #[serde(default)]
    passages: Option<Vec<Passage>>,
}

fn error_response(status: StatusCode, message: &str) -> Response {
    let body = serde_json::json!({ "error": message }).to_string();
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn status_for(kind: ErrorKind) -> StatusCode {
    match kind {
        ErrorKind::Input => StatusCode::BAD_REQUEST,
        ErrorKind::Provider => StatusCode::BAD_GATEWAY,
        ErrorKind::Internal => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

async fn health() -> Response {
    (StatusCode::OK, [(header::CONTENT_TYPE, "application/json")], r#"{"status":"ok"}"#).into_response()
}

async fn handle(state: Arc<AppState>, stage: Stage, body: Bytes) -> Response {
    let request: AnswerRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error_response(StatusCode::BAD_REQUEST, &format!("malformed request: {e}")),
    };
    let worker = tokio::task::spawn_blocking(move || -> Result<String, CliError> {
        let passages = match request.passages {
            Some(p) => p,
            None => state
                .fixtures
                .get(&request.query)
                .cloned()
                .ok_or_else(|| CliError::input(format!("no passages given and no served record for {:?}", request.query)))?,
        };
        render_package(&stage.run(&state.engine, &request.query, &passages)?)
    });
    match worker.await {
        Ok(Ok(body)) => (StatusCode::OK, [(header::CONTENT_TYPE, "application/json")], body).into_response(),
        Ok(Err(e)) => error_response(status_for(e.kind), &e.message),
        Err(e) => error_response(StatusCode::INTERNAL_SERVER_ERROR, &format!("worker failed: {e}")),
    }
}

pub fn router(engine: Engine, fixtures: BTreeMap<String, Vec<Passage>>) -> Router {
    let state = Arc::new(AppState { engine, fixtures });
    let answer_state = state.clone();
    let pipeline_state = state;
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/answer", post(move |body: Bytes| handle(answer_state, Stage::Answer, body)))
        .route("/v1/pipeline", post(move |body: Bytes| handle(pipeline_state, Stage::Pipeline, body)))
}

/// Binds, reports the bound address on stderr and serves until Ctrl-C.
pub fn serve(engine: Engine, fixtures: BTreeMap<String, Vec<Passage>>, addr: &str) -> Result<(), CliError> {
    let addr: SocketAddr = addr.parse().map_err(|e| CliError::input(format!("--addr {addr:?}: {e}")))?;
    let runtime = tokio::runtime::Runtime::new()
        .map_err(|e| CliError { kind: ErrorKind::Internal, message: format!("runtime: {e}") })?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| CliError::input(format!("bind {addr}: {e}")))?;
        let local = listener
            .local_addr()
            .map_err(|e| CliError { kind: ErrorKind::Internal, message: e.to_string() })?;
        eprintln!("listening on http://{local}");
        axum::serve(listener, router(engine, fixtures))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| CliError { kind: ErrorKind::Internal, message: format!("server: {e}") })
    })
}
