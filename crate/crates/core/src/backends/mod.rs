//! Emotion classifier and text rewriter backends.
//!
//! Two HTTP wire contracts (classify, rewrite) plus a chat-completions
//! adapter, all behind a retry policy, a per-backend concurrency bound and an
//! optional persistent response cache. Deterministic in-process mocks
//! implement the same traits for offline use.

use async_trait::async_trait;
use thiserror::Error;

use crate::emotion_mapping::{LabelScores, MappingError};
use crate::prompts::RenderedPrompt;

pub mod cache;
pub mod http;
pub mod mock;
pub mod retry;
pub mod wire;

pub use cache::ResponseCache;
pub use http::{HttpBackendConfig, HttpClassifier, HttpRewriter, RewriterKind};
pub use mock::{MockClassifier, MockRewriter};
pub use retry::RetryPolicy;

#[derive(Debug, Error)]
pub enum BackendError {
    /// Connection failure, timeout, 5xx or 429. Retried.
    #[error("transport error: {0}")]
    Transport(String),
    /// Non-retryable HTTP status.
    #[error("request rejected with status {status}: {body}")]
    Rejected { status: u16, body: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("contract violation: {0}")]
    ContractViolation(String),
    #[error("input text is empty")]
    EmptyText,
    #[error("response cache: {0}")]
    Cache(#[from] std::io::Error),
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, BackendError::Transport(_))
    }
}

impl From<MappingError> for BackendError {
    fn from(e: MappingError) -> Self {
        BackendError::ContractViolation(e.to_string())
    }
}

#[async_trait]
pub trait ClassifierBackend: Send + Sync {
    /// Identifier recorded in run metadata, e.g. `mock` or the model name.
    fn model_id(&self) -> &str;

    async fn classify(&self, text: &str) -> Result<LabelScores, BackendError>;
}

#[async_trait]
pub trait RewriterBackend: Send + Sync {
    fn model_id(&self) -> &str;

    async fn rewrite(&self, prompt: &RenderedPrompt) -> Result<String, BackendError>;
}
