//! Chat-completion and embedding client over the common JSON wire schema,
//! with a content-addressed response cache and bounded concurrency.

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use firmod_core::store::{atomic_write, sha256_hex};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::Semaphore;
use tracing::{debug, warn};

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("endpoint {0} is unreachable")]
    EndpointUnreachable(String),
    #[error("endpoint answered HTTP {status}: {body}")]
    HttpError { status: u16, body: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("invalid request: {0}")]
    InvalidRequest(&'static str),
    #[error("HTTP client setup failed: {0}")]
    Client(String),
    #[error("response cache: {0}")]
    Cache(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::Assistant, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

pub const DEFAULT_MAX_TOKENS: u32 = 512;

impl ChatRequest {
    /// Temperature 0 and the default token limit.
    pub fn new(model: impl Into<String>, messages: Vec<ChatMessage>) -> Self {
        ChatRequest { model: model.into(), messages, temperature: 0.0, max_tokens: DEFAULT_MAX_TOKENS }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.messages.is_empty() {
            return Err(GatewayError::InvalidRequest("messages must not be empty"));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(GatewayError::InvalidRequest("temperature must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub model: String,
    pub latency_seconds: f64,
    pub from_cache: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub model: String,
    #[serde(default)]
    pub from_cache: bool,
}

/// SHA-256 over the canonical JSON of `{kind, model, body}`. Object keys
/// serialize sorted, so equal requests hash equally.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CacheKey(pub String);

impl CacheKey {
    pub fn new(kind: &str, model: &str, body: &Value) -> Self {
        let canonical = json!({ "kind": kind, "model": model, "body": body });
        CacheKey(sha256_hex(canonical.to_string().as_bytes()))
    }

    pub fn for_chat(req: &ChatRequest) -> Self {
        CacheKey::new("chat", &req.model, &chat_body(req))
    }

    pub fn for_embedding(model: &str, text: &str) -> Self {
        CacheKey::new("embedding", model, &embedding_body(model, text))
    }
}

fn chat_body(req: &ChatRequest) -> Value {
    serde_json::to_value(req).expect("chat request serializes")
}

fn embedding_body(model: &str, text: &str) -> Value {
    json!({ "model": model, "input": text })
}

#[derive(Debug, Clone)]
pub struct GatewayConfig {
    /// Base URL up to and including any `/v1` prefix.
    pub base_url: String,
    pub api_key: Option<String>,
    /// Additional attempts after the first.
    pub retries: u32,
    pub concurrency: usize,
    /// `None` disables caching.
    pub cache_dir: Option<PathBuf>,
    pub timeout: Duration,
    pub initial_backoff: Duration,
}

impl GatewayConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        GatewayConfig {
            base_url: base_url.into(),
            api_key: None,
            retries: 3,
            concurrency: 4,
            cache_dir: None,
            timeout: Duration::from_secs(600),
            initial_backoff: Duration::from_millis(500),
        }
    }
}

pub struct Gateway {
    client: reqwest::Client,
    config: GatewayConfig,
    permits: Arc<Semaphore>,
    network_requests: AtomicU64,
    cache_hits: AtomicU64,
}

enum Attempt {
    Done(String),
    Transient(GatewayError),
    Fatal(GatewayError),
}

impl Gateway {
    pub fn new(config: GatewayConfig) -> Result<Self, GatewayError> {
        let client = reqwest::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| GatewayError::Client(e.to_string()))?;
        Ok(Gateway {
            client,
            permits: Arc::new(Semaphore::new(config.concurrency.max(1))),
            config,
            network_requests: AtomicU64::new(0),
            cache_hits: AtomicU64::new(0),
        })
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    /// HTTP attempts issued so far, retries included.
    pub fn network_requests(&self) -> u64 {
        self.network_requests.load(Ordering::Relaxed)
    }

    pub fn cache_hits(&self) -> u64 {
        self.cache_hits.load(Ordering::Relaxed)
    }

    pub async fn chat(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        req.validate()?;
        let start = Instant::now();
        let key = CacheKey::for_chat(req);
        let (raw, from_cache) = self.fetch("chat/completions", &key, &chat_body(req)).await?;
        let text = parse_chat(&raw)?;
        Ok(ChatResponse { text, model: req.model.clone(), latency_seconds: start.elapsed().as_secs_f64(), from_cache })
    }

    pub async fn embed(&self, model: &str, text: &str) -> Result<EmbeddingVector, GatewayError> {
        if text.trim().is_empty() {
            return Err(GatewayError::EmptyText);
        }
        let key = CacheKey::for_embedding(model, text);
        let (raw, from_cache) = self.fetch("embeddings", &key, &embedding_body(model, text)).await?;
        Ok(EmbeddingVector { values: parse_embedding(&raw)?, model: model.to_string(), from_cache })
    }

    fn cache_path(&self, key: &CacheKey) -> Option<PathBuf> {
        self.config.cache_dir.as_ref().map(|d| d.join(format!("{}.json", key.0)))
    }

    /// Raw response body for `key`, from the cache or the network.
    async fn fetch(&self, route: &str, key: &CacheKey, body: &Value) -> Result<(String, bool), GatewayError> {
        let cache_path = self.cache_path(key);
        if let Some(path) = &cache_path {
            if let Ok(raw) = tokio::fs::read_to_string(path).await {
                debug!(key = %key.0, "cache hit");
                self.cache_hits.fetch_add(1, Ordering::Relaxed);
                return Ok((raw, true));
            }
        }
        let raw = {
            let _permit = self.permits.acquire().await.expect("semaphore never closes");
            self.post_with_retries(route, key, body).await?
        };
        if let Some(path) = &cache_path {
            atomic_write(path, raw.as_bytes()).map_err(|e| GatewayError::Cache(e.to_string()))?;
        }
        Ok((raw, false))
    }

    async fn post_with_retries(&self, route: &str, key: &CacheKey, body: &Value) -> Result<String, GatewayError> {
        let url = format!("{}/{route}", self.config.base_url.trim_end_matches('/'));
        let attempts = self.config.retries + 1;
        let mut backoff = self.config.initial_backoff;
        let mut last = None;
        for attempt in 1..=attempts {
            debug!(%url, key = %key.0, attempt, "request");
            match self.post_once(&url, body).await {
                Attempt::Done(raw) => return Ok(raw),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Transient(e) => {
                    warn!(%url, attempt, error = %e, "transient failure");
                    last = Some(e);
                }
            }
            if attempt < attempts {
                tokio::time::sleep(backoff).await;
                backoff = backoff.saturating_mul(2);
            }
        }
        Err(match last.expect("at least one attempt") {
            e @ GatewayError::EndpointUnreachable(_) => e,
            e => GatewayError::RetriesExhausted { attempts, last: e.to_string() },
        })
    }

    async fn post_once(&self, url: &str, body: &Value) -> Attempt {
        self.network_requests.fetch_add(1, Ordering::Relaxed);
        let mut rb = self.client.post(url).json(body);
        if let Some(k) = &self.config.api_key {
            rb = rb.bearer_auth(k);
        }
        let resp = match rb.send().await {
            Ok(r) => r,
            Err(e) if e.is_connect() || e.is_timeout() => {
                return Attempt::Transient(GatewayError::EndpointUnreachable(format!("{url}: {e}")))
            }
            Err(e) => return Attempt::Transient(GatewayError::MalformedResponse(e.to_string())),
        };
        let status = resp.status();
        let text = match resp.text().await {
            Ok(t) => t,
            Err(e) => return Attempt::Transient(GatewayError::MalformedResponse(e.to_string())),
        };
        if status.is_success() {
            Attempt::Done(text)
        } else {
            let err = GatewayError::HttpError { status: status.as_u16(), body: text };
            if status.is_server_error() || status.as_u16() == 429 {
                Attempt::Transient(err)
            } else {
                Attempt::Fatal(err)
            }
        }
    }
}

pub fn parse_chat(raw: &str) -> Result<String, GatewayError> {
    let v: Value = serde_json::from_str(raw).map_err(|e| GatewayError::MalformedResponse(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| GatewayError::MalformedResponse("missing choices[0].message.content".into()))
}

pub fn parse_embedding(raw: &str) -> Result<Vec<f64>, GatewayError> {
    let v: Value = serde_json::from_str(raw).map_err(|e| GatewayError::MalformedResponse(e.to_string()))?;
    let values: Vec<f64> = v
        .pointer("/data/0/embedding")
        .and_then(Value::as_array)
        .ok_or_else(|| GatewayError::MalformedResponse("missing data[0].embedding".into()))?
        .iter()
        .map(|x| x.as_f64().ok_or_else(|| GatewayError::MalformedResponse("non-numeric embedding value".into())))
        .collect::<Result<_, _>>()?;
    if values.is_empty() {
        return Err(GatewayError::MalformedResponse("empty embedding".into()));
    }
    Ok(values)
}
