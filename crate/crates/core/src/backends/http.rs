use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use super::wire::{
    ChatMessage, ChatRequest, ChatResponse, ClassifyRequest, ClassifyResponse, RewriteRequest,
    RewriteResponse, CHAT_PATH, CLASSIFY_PATH, REWRITE_PATH,
};
use super::{BackendError, ClassifierBackend, ResponseCache, RetryPolicy, RewriterBackend};
use crate::emotion_mapping::LabelScores;
use crate::prompts::RenderedPrompt;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
pub const DEFAULT_PARALLELISM: usize = 4;

#[derive(Debug, Clone)]
pub struct HttpBackendConfig {
    /// Base URL without the contract path, e.g. `http://127.0.0.1:8000`.
    pub base_url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    pub retry: RetryPolicy,
    /// Maximum simultaneous in-flight requests to this backend.
    pub parallelism: usize,
    /// Extra decoding parameters, forwarded verbatim to chat endpoints.
    pub params: serde_json::Map<String, serde_json::Value>,
}

impl HttpBackendConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model: model.into(),
            api_key: None,
            timeout: DEFAULT_TIMEOUT,
            retry: RetryPolicy::default(),
            parallelism: DEFAULT_PARALLELISM,
            params: serde_json::Map::new(),
        }
    }
}

/// Shared plumbing: cache lookup, concurrency bound, retries.
struct Transport {
    backend_id: &'static str,
    client: reqwest::Client,
    config: HttpBackendConfig,
    limiter: Arc<Semaphore>,
    cache: Option<Arc<ResponseCache>>,
    calls: AtomicU64,
}

impl Transport {
    fn new(
        backend_id: &'static str,
        config: HttpBackendConfig,
        cache: Option<Arc<ResponseCache>>,
    ) -> Result<Self, BackendError> {
        let client = reqwest::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| BackendError::Transport(format!("cannot build HTTP client: {e}")))?;
        Ok(Self {
            backend_id,
            client,
            limiter: Arc::new(Semaphore::new(config.parallelism.max(1))),
            config,
            cache,
            calls: AtomicU64::new(0),
        })
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.config.base_url.trim_end_matches('/'), path)
    }

    /// POSTs `body` to `path` and decodes the reply with `decode`. Only bodies
    /// that decode successfully are cached.
    async fn post<T>(
        &self,
        path: &str,
        body: &impl Serialize,
        decode: impl Fn(&str) -> Result<T, BackendError>,
    ) -> Result<T, BackendError> {
        let body = serde_json::to_vec(body).expect("request bodies serialize");
        let key = ResponseCache::key(self.backend_id, &self.config.model, path, &body);
        if let Some(hit) = self.cache.as_ref().and_then(|c| c.get(&key)) {
            return decode(&hit);
        }

        let url = self.url(path);
        let text = self
            .config
            .retry
            .run(|attempt| {
                let url = &url;
                let body = &body;
                async move {
                    let _permit = self
                        .limiter
                        .acquire()
                        .await
                        .expect("semaphore never closed");
                    self.calls.fetch_add(1, Ordering::Relaxed);
                    log::debug!("POST {url} attempt {attempt}");
                    self.send(url, body.clone()).await
                }
            })
            .await?;

        let value = decode(&text)?;
        if let Some(cache) = &self.cache {
            cache.put(&key, &text)?;
        }
        Ok(value)
    }

    async fn send(&self, url: &str, body: Vec<u8>) -> Result<String, BackendError> {
        let mut req = self
            .client
            .post(url)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .await
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp
            .text()
            .await
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        if status.is_success() {
            Ok(text)
        } else if status.is_server_error() || status.as_u16() == 429 {
            Err(BackendError::Transport(format!("status {status}: {text}")))
        } else {
            Err(BackendError::Rejected {
                status: status.as_u16(),
                body: text,
            })
        }
    }
}

pub fn decode_classify(body: &str) -> Result<LabelScores, BackendError> {
    let resp: ClassifyResponse =
        serde_json::from_str(body).map_err(|e| BackendError::MalformedResponse(e.to_string()))?;
    Ok(LabelScores::from_named(
        resp.labels.iter().map(|l| (l.label.as_str(), l.score)),
    )?)
}

pub fn decode_rewrite(body: &str) -> Result<String, BackendError> {
    let resp: RewriteResponse =
        serde_json::from_str(body).map_err(|e| BackendError::MalformedResponse(e.to_string()))?;
    non_empty(resp.text)
}

pub fn decode_chat(body: &str) -> Result<String, BackendError> {
    let resp: ChatResponse =
        serde_json::from_str(body).map_err(|e| BackendError::MalformedResponse(e.to_string()))?;
    let first = resp
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| BackendError::ContractViolation("response has no choices".into()))?;
    non_empty(first.message.content)
}

fn non_empty(text: String) -> Result<String, BackendError> {
    if text.trim().is_empty() {
        Err(BackendError::ContractViolation(
            "rewriter returned empty text".into(),
        ))
    } else {
        Ok(text)
    }
}

pub struct HttpClassifier {
    transport: Transport,
}

impl HttpClassifier {
    pub fn new(
        config: HttpBackendConfig,
        cache: Option<Arc<ResponseCache>>,
    ) -> Result<Self, BackendError> {
        Ok(Self {
            transport: Transport::new("classify", config, cache)?,
        })
    }

    /// Requests that reached the network (cache hits excluded, retries included).
    pub fn network_calls(&self) -> u64 {
        self.transport.calls.load(Ordering::Relaxed)
    }
}

#[async_trait]
impl ClassifierBackend for HttpClassifier {
    fn model_id(&self) -> &str {
        &self.transport.config.model
    }

    async fn classify(&self, text: &str) -> Result<LabelScores, BackendError> {
        if text.trim().is_empty() {
            return Err(BackendError::EmptyText);
        }
        let body = ClassifyRequest {
            text: text.to_string(),
        };
        self.transport
            .post(CLASSIFY_PATH, &body, decode_classify)
            .await
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewriterKind {
    /// `POST /v1/rewrite` with `{"system", "user"}`.
    #[default]
    Native,
    /// `POST /v1/chat/completions` with a system and a user message.
    Chat,
}

pub struct HttpRewriter {
    kind: RewriterKind,
    transport: Transport,
}

impl HttpRewriter {
    pub fn new(
        kind: RewriterKind,
        config: HttpBackendConfig,
        cache: Option<Arc<ResponseCache>>,
    ) -> Result<Self, BackendError> {
        let id = match kind {
            RewriterKind::Native => "rewrite",
            RewriterKind::Chat => "chat",
        };
        Ok(Self {
            kind,
            transport: Transport::new(id, config, cache)?,
        })
    }

    pub fn network_calls(&self) -> u64 {
        self.transport.calls.load(Ordering::Relaxed)
    }
}

#[async_trait]
impl RewriterBackend for HttpRewriter {
    fn model_id(&self) -> &str {
        &self.transport.config.model
    }

    async fn rewrite(&self, prompt: &RenderedPrompt) -> Result<String, BackendError> {
        match self.kind {
            RewriterKind::Native => {
                let body = RewriteRequest {
                    system: prompt.system.clone(),
                    user: prompt.user.clone(),
                };
                self.transport
                    .post(REWRITE_PATH, &body, decode_rewrite)
                    .await
            }
            RewriterKind::Chat => {
                let model = &self.transport.config.model;
                let body = ChatRequest {
                    model: (!model.is_empty()).then(|| model.clone()),
                    messages: vec![
                        ChatMessage {
                            role: "system".into(),
                            content: prompt.system.clone(),
                        },
                        ChatMessage {
                            role: "user".into(),
                            content: prompt.user.clone(),
                        },
                    ],
                    params: self.transport.config.params.clone(),
                };
                self.transport.post(CHAT_PATH, &body, decode_chat).await
            }
        }
    }
}
