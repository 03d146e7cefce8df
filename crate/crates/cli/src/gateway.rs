//! HTTP moderation gateway: `POST /v1/moderate` and `GET /healthz`.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use emodrift_core::pipeline::{moderate, ModerationOutcome};
use emodrift_core::{BackendError, CoreEmotion, Engine, PipelineError, Style, VadVector};

pub const MODERATE_PATH: &str = "/v1/moderate";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModerateRequest {
    pub text: String,
    #[serde(default)]
    pub target: Option<[f64; 3]>,
    #[serde(default)]
    pub refine: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModerateResponse {
    /// Flagged rewrite, or the input unchanged when it was not harmful.
    pub text: String,
    pub flagged: bool,
    pub original_emotion: CoreEmotion,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub style: Option<Style>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rewritten_emotion: Option<CoreEmotion>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drift: Option<f64>,
}

impl From<ModerationOutcome> for ModerateResponse {
    fn from(o: ModerationOutcome) -> Self {
        match o {
            ModerationOutcome::Benign { text, emotion } => Self {
                text,
                flagged: false,
                original_emotion: emotion,
                style: None,
                rewritten_emotion: None,
                drift: None,
            },
            ModerationOutcome::Moderated {
                text,
                style,
                original_emotion,
                rewritten_emotion,
                drift,
                ..
            } => Self {
                text,
                flagged: true,
                original_emotion,
                style: Some(style),
                rewritten_emotion: Some(rewritten_emotion),
                drift: Some(drift),
            },
        }
    }
}

struct GatewayState {
    engine: Arc<Engine>,
    limiter: Semaphore,
    refine: bool,
}

fn error(status: StatusCode, message: impl std::fmt::Display) -> Response {
    (
        status,
        Json(serde_json::json!({ "error": message.to_string() })),
    )
        .into_response()
}

fn status_for(e: &PipelineError) -> StatusCode {
    match e {
        PipelineError::EmptyText | PipelineError::AlreadyFlagged => StatusCode::BAD_REQUEST,
        PipelineError::Backend(BackendError::Transport(_)) => StatusCode::SERVICE_UNAVAILABLE,
        PipelineError::Backend(BackendError::EmptyText) => StatusCode::BAD_REQUEST,
        PipelineError::Backend(_) | PipelineError::Mapping(_) | PipelineError::NoCompletedStyle => {
            StatusCode::BAD_GATEWAY
        }
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

async fn moderate_handler(State(state): State<Arc<GatewayState>>, body: Bytes) -> Response {
    let req: ModerateRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => {
            return error(
                StatusCode::BAD_REQUEST,
                format!("invalid request body: {e}"),
            )
        }
    };
    if req.text.trim().is_empty() {
        return error(StatusCode::BAD_REQUEST, "text is empty");
    }
    let target = match req
        .target
        .map(|[v, a, d]| VadVector::new(v, a, d))
        .transpose()
    {
        Ok(t) => t,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("target: {e}")),
    };
    let _permit = state
        .limiter
        .acquire()
        .await
        .expect("semaphore never closed");
    let refine = req.refine.unwrap_or(state.refine);
    match moderate(&state.engine, &req.text, target.as_ref(), refine).await {
        Ok(outcome) => Json(ModerateResponse::from(outcome)).into_response(),
        Err(e) => {
            log::warn!("moderation failed: {e}");
            error(status_for(&e), e)
        }
    }
}

/// At most `max_concurrency` moderation requests run at once; the rest wait.
pub fn router(engine: Arc<Engine>, max_concurrency: usize, refine: bool) -> Router {
    let state = Arc::new(GatewayState {
        engine,
        limiter: Semaphore::new(max_concurrency.max(1)),
        refine,
    });
    Router::new()
        .route(MODERATE_PATH, post(moderate_handler))
        .route("/healthz", get(|| async { "ok" }))
        .with_state(state)
}

pub async fn serve(listener: tokio::net::TcpListener, app: Router) -> std::io::Result<()> {
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
