//! HTTP routes and the WebSocket endpoint.

use std::path::Path;

use axum::extract::rejection::JsonRejection;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cutaneous_core::protocol::{decode_frames, parse_command, CommandError, ServerMessage};
use futures_util::{SinkExt, StreamExt};
use serde::de::DeserializeOwned;
use serde::Serialize;
use tokio::sync::broadcast::error::RecvError;
use tower_http::services::ServeDir;

use crate::api::{self, ApiError, ErrorBody, Health};
use crate::AppState;

/// All routes. With `ui_dir`, any other path is served from that directory.
pub fn router(state: AppState, ui_dir: Option<&Path>) -> Router {
    let app = Router::new()
        .route("/api/health", get(health))
        .route("/api/config", get(config))
        .route("/api/kinematics/forward", post(forward))
        .route("/api/kinematics/inverse", post(inverse))
        .route("/api/workspace", post(workspace))
        .route("/api/patterns", post(patterns))
        .route("/api/trials", post(trials))
        .route("/api/replay", post(replay))
        .route("/api/session/log", get(session_log))
        .route("/api/session/results", get(session_results))
        .route("/session", get(session_socket))
        .with_state(state);
    match ui_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app.fallback(|| async { failure(StatusCode::NOT_FOUND, "no such endpoint".into()) }),
    }
}

type Reply<T> = Result<Json<T>, Response>;

fn failure(status: StatusCode, error: String) -> Response {
    (status, Json(ErrorBody { error })).into_response()
}

fn body<T>(req: Result<Json<T>, JsonRejection>) -> Result<T, Response> {
    req.map(|Json(t)| t)
        .map_err(|e| failure(StatusCode::BAD_REQUEST, e.body_text()))
}

fn reply<T: Serialize>(r: Result<T, ApiError>) -> Reply<T> {
    r.map(Json).map_err(|e| failure(StatusCode::UNPROCESSABLE_ENTITY, e.0))
}

/// Runs a computation off the async workers.
async fn blocking<T, R, F>(state: AppState, req: Result<Json<T>, JsonRejection>, f: F) -> Reply<R>
where
    T: DeserializeOwned + Send + 'static,
    R: Serialize + Send + 'static,
    F: FnOnce(&cutaneous_core::config::Config, &T) -> Result<R, ApiError> + Send + 'static,
{
    let req = body(req)?;
    let out = tokio::task::spawn_blocking(move || f(&state.config, &req))
        .await
        .map_err(|e| failure(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    reply(out)
}

async fn health() -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        version: env!("CARGO_PKG_VERSION").into(),
    })
}

async fn config(State(state): State<AppState>) -> Reply<api::ConfigResponse> {
    reply(api::config_response(&state.config))
}

async fn forward(
    State(state): State<AppState>,
    req: Result<Json<api::ForwardRequest>, JsonRejection>,
) -> Reply<api::ForwardResponse> {
    reply(api::forward(&state.config, &body(req)?))
}

async fn inverse(
    State(state): State<AppState>,
    req: Result<Json<api::InverseRequest>, JsonRejection>,
) -> Reply<api::InverseResponse> {
    reply(api::inverse(&state.config, &body(req)?))
}

async fn workspace(
    State(state): State<AppState>,
    req: Result<Json<api::WorkspaceRequest>, JsonRejection>,
) -> Reply<api::WorkspaceResponse> {
    blocking(state, req, api::workspace).await
}

async fn patterns(
    State(state): State<AppState>,
    req: Result<Json<api::PatternRequest>, JsonRejection>,
) -> Reply<api::PatternResponse> {
    blocking(state, req, api::pattern).await
}

async fn trials(
    State(state): State<AppState>,
    req: Result<Json<api::TrialsRequest>, JsonRejection>,
) -> Reply<api::TrialsResponse> {
    blocking(state, req, api::run_trials).await
}

async fn replay(
    State(state): State<AppState>,
    req: Result<Json<api::ReplayRequest>, JsonRejection>,
) -> Reply<api::ReplayResponse> {
    blocking(state, req, api::run_replay).await
}

fn session_gone() -> Response {
    failure(StatusCode::SERVICE_UNAVAILABLE, "session has stopped".into())
}

async fn session_log(State(state): State<AppState>) -> Result<Response, Response> {
    let log = state.session.command_log().await.ok_or_else(session_gone)?;
    let mut out = Vec::new();
    log.write_jsonl(&mut out).expect("writing to memory");
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], out).into_response())
}

async fn session_results(State(state): State<AppState>) -> Result<Response, Response> {
    let results = state.session.results().await.ok_or_else(session_gone)?;
    Ok(([(header::CONTENT_TYPE, "text/csv")], api::results_csv(&results)).into_response())
}

async fn session_socket(ws: WebSocketUpgrade, State(state): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| client(socket, state))
}

/// One WebSocket client: commands in, acks and errors back to this client,
/// broadcast lines out.
async fn client(socket: WebSocket, state: AppState) {
    let (mut sink, mut stream) = socket.split();
    let mut lines = state.session.subscribe();
    let mut shutdown = state.shutdown.clone();
    loop {
        tokio::select! {
            inbound = stream.next() => {
                let text = match inbound {
                    Some(Ok(Message::Text(text))) => text,
                    Some(Ok(Message::Close(_))) | Some(Err(_)) | None => return,
                    Some(Ok(_)) => continue,
                };
                for frame in decode_frames(text.as_str()) {
                    let reply = match frame.map_err(|e| CommandError::MalformedMessage(e.to_string())) {
                        Ok(frame) => match parse_command(&frame) {
                            Ok(msg) => state.session.command(msg).await.map(ServerMessage::Ack),
                            Err(e) => Err(e),
                        },
                        Err(e) => Err(e),
                    };
                    let reply = reply.unwrap_or_else(ServerMessage::Error);
                    if sink.send(Message::Text(reply.to_line().into())).await.is_err() {
                        return;
                    }
                }
            }
            line = lines.recv() => match line {
                Ok(line) => {
                    if sink.send(Message::Text(line.as_ref().into())).await.is_err() {
                        return;
                    }
                }
                Err(RecvError::Lagged(skipped)) => tracing::debug!(skipped, "slow subscriber dropped lines"),
                Err(RecvError::Closed) => return,
            },
            _ = shutdown.changed() => {
                let _ = sink.send(Message::Close(None)).await;
                return;
            }
        }
    }
}
