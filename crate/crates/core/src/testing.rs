//! In-process fake inference server speaking the classify, rewrite and
//! chat-completions contracts, backed by the deterministic mocks.
//!
//! Counts calls per endpoint and the peak number of concurrent requests,
//! and can fail the first N requests or stall them past a client timeout.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;

use crate::backends::wire::{
    ChatRequest, ClassifyRequest, ClassifyResponse, LabelScore, RewriteRequest, RewriteResponse,
    CHAT_PATH, CLASSIFY_PATH, REWRITE_PATH,
};
use crate::backends::{MockClassifier, MockRewriter};
use crate::prompts::RenderedPrompt;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FailureMode {
    /// Answer with this status code.
    Status(u16),
    /// Sleep this long before answering normally.
    Stall(Duration),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FakeServerConfig {
    /// Added to every successful response.
    pub delay: Duration,
    /// How many requests (across endpoints) fail before normal service.
    pub fail_first: u64,
    pub failure: FailureMode,
}

impl Default for FakeServerConfig {
    fn default() -> Self {
        Self {
            delay: Duration::ZERO,
            fail_first: 0,
            failure: FailureMode::Status(503),
        }
    }
}

#[derive(Debug, Default)]
pub struct FakeStats {
    pub requests: AtomicU64,
    pub classify_calls: AtomicU64,
    pub rewrite_calls: AtomicU64,
    pub chat_calls: AtomicU64,
    pub in_flight: AtomicU64,
    pub max_in_flight: AtomicU64,
    /// When set, every request gets a 503.
    pub unavailable: AtomicBool,
}

impl FakeStats {
    pub fn requests(&self) -> u64 {
        self.requests.load(Ordering::SeqCst)
    }

    pub fn max_in_flight(&self) -> u64 {
        self.max_in_flight.load(Ordering::SeqCst)
    }

    pub fn reset(&self) {
        for c in [
            &self.requests,
            &self.classify_calls,
            &self.rewrite_calls,
            &self.chat_calls,
            &self.max_in_flight,
        ] {
            c.store(0, Ordering::SeqCst);
        }
    }
}

struct InFlight<'a>(&'a FakeStats);

impl<'a> InFlight<'a> {
    fn enter(stats: &'a FakeStats) -> Self {
        let now = stats.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        stats.max_in_flight.fetch_max(now, Ordering::SeqCst);
        Self(stats)
    }
}

impl Drop for InFlight<'_> {
    fn drop(&mut self) {
        self.0.in_flight.fetch_sub(1, Ordering::SeqCst);
    }
}

struct Inner {
    config: FakeServerConfig,
    stats: Arc<FakeStats>,
    classifier: MockClassifier,
    rewriter: MockRewriter,
}

type Shared = Arc<Inner>;

/// Common prologue: counting, injected failures and delay. `Some` short-circuits.
async fn gate(inner: &Inner) -> Option<Response> {
    let n = inner.stats.requests.fetch_add(1, Ordering::SeqCst);
    if inner.stats.unavailable.load(Ordering::SeqCst) {
        return Some((StatusCode::SERVICE_UNAVAILABLE, "unavailable").into_response());
    }
    if n < inner.config.fail_first {
        match inner.config.failure {
            FailureMode::Status(code) => {
                let status = StatusCode::from_u16(code).unwrap_or(StatusCode::SERVICE_UNAVAILABLE);
                return Some((status, "injected failure").into_response());
            }
            FailureMode::Stall(d) => tokio::time::sleep(d).await,
        }
    }
    if !inner.config.delay.is_zero() {
        tokio::time::sleep(inner.config.delay).await;
    }
    None
}

async fn classify(State(inner): State<Shared>, Json(req): Json<ClassifyRequest>) -> Response {
    let _guard = InFlight::enter(&inner.stats);
    inner.stats.classify_calls.fetch_add(1, Ordering::SeqCst);
    if let Some(r) = gate(&inner).await {
        return r;
    }
    match inner.classifier.scores(&req.text) {
        Ok(scores) => Json(ClassifyResponse {
            labels: scores
                .iter()
                .map(|(label, score)| LabelScore {
                    label: label.as_str().to_string(),
                    score,
                })
                .collect(),
        })
        .into_response(),
        Err(e) => (StatusCode::BAD_REQUEST, e.to_string()).into_response(),
    }
}

async fn rewrite(State(inner): State<Shared>, Json(req): Json<RewriteRequest>) -> Response {
    let _guard = InFlight::enter(&inner.stats);
    inner.stats.rewrite_calls.fetch_add(1, Ordering::SeqCst);
    if let Some(r) = gate(&inner).await {
        return r;
    }
    let prompt = RenderedPrompt {
        system: req.system,
        user: req.user,
    };
    Json(RewriteResponse {
        text: inner.rewriter.transform(&prompt),
    })
    .into_response()
}

async fn chat(State(inner): State<Shared>, Json(req): Json<ChatRequest>) -> Response {
    let _guard = InFlight::enter(&inner.stats);
    inner.stats.chat_calls.fetch_add(1, Ordering::SeqCst);
    if let Some(r) = gate(&inner).await {
        return r;
    }
    let pick = |role: &str| {
        req.messages
            .iter()
            .filter(|m| m.role == role)
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    };
    let prompt = RenderedPrompt {
        system: pick("system"),
        user: pick("user"),
    };
    Json(json!({
        "choices": [{"message": {"role": "assistant", "content": inner.rewriter.transform(&prompt)}}]
    }))
    .into_response()
}

pub struct FakeServer {
    pub addr: SocketAddr,
    pub base_url: String,
    pub stats: Arc<FakeStats>,
    handle: tokio::task::JoinHandle<()>,
}

impl FakeServer {
    /// Binds to `127.0.0.1:0` and serves until dropped.
    pub async fn spawn(config: FakeServerConfig) -> std::io::Result<Self> {
        let stats = Arc::new(FakeStats::default());
        let inner = Arc::new(Inner {
            config,
            stats: stats.clone(),
            classifier: MockClassifier::new(),
            rewriter: MockRewriter::new(),
        });
        let app = Router::new()
            .route(CLASSIFY_PATH, post(classify))
            .route(REWRITE_PATH, post(rewrite))
            .route(CHAT_PATH, post(chat))
            .route("/healthz", get(|| async { "ok" }))
            .with_state(inner);
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
        let addr = listener.local_addr()?;
        let handle = tokio::spawn(async move {
            if let Err(e) = axum::serve(listener, app).await {
                log::error!("fake server stopped: {e}");
            }
        });
        Ok(Self {
            addr,
            base_url: format!("http://{addr}"),
            stats,
            handle,
        })
    }

    pub fn set_unavailable(&self, down: bool) {
        self.stats.unavailable.store(down, Ordering::SeqCst);
    }
}

impl Drop for FakeServer {
    fn drop(&mut self) {
        self.handle.abort();
    }
}
