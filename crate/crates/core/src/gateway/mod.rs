//! Provider plumbing: chat-completion, NLI, and embedding handles.
//!
//! A handle bundles a backend (HTTP or deterministic mock) with request
//! shaping, bounded retries with exponential backoff, an in-flight request
//! limiter, and an optional content-addressed response cache. Handles are
//! cheap to clone and safe to share across threads; clones share the same
//! backend, limiter, cache, and call counter.

mod cache;
mod catalog;
mod http;
mod mock;

pub use cache::ResponseCache;
pub use catalog::{ProviderCatalog, ProviderSpec};
pub use http::{HttpChat, HttpEmbedding, HttpNli};
pub use mock::{MockEmbedding, MockNli, MockScript, NliRule, ScriptRecord, MOCK_SENTINEL};

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GatewayError {
    /// Retryable failure (network hiccup, rate limit, flaky mock record).
    #[error("transient provider failure: {0}")]
    Transient(String),
    /// Non-retryable failure (bad request, auth, malformed response).
    #[error("provider failure: {0}")]
    Permanent(String),
    #[error("provider still failing after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    /// Strict mock received a prompt with no matching fixture.
    #[error("no mock fixture matches prompt digest {digest}")]
    UnmatchedPrompt { digest: String },
    #[error("malformed mock script: {0}")]
    Script(String),
    #[error("embedding dimension mismatch: declared {declared}, got {got}")]
    DimensionMismatch { declared: usize, got: usize },
    #[error("provider config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Full SHA-256 hex digest of a prompt; names fixtures and cache entries.
pub fn prompt_digest(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodingParams {
    pub temperature: f64,
    pub max_tokens: Option<u32>,
}

impl Default for DecodingParams {
    fn default() -> Self {
        // Deterministic decoding unless explicitly overridden.
        Self {
            temperature: 0.0,
            max_tokens: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_backoff: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    /// No waiting between attempts; used by mock-backed handles in tests.
    pub fn immediate(max_attempts: u32) -> Self {
        Self {
            max_attempts,
            base_backoff: Duration::ZERO,
        }
    }

    fn backoff_before(&self, attempt: u32) -> Duration {
        if attempt <= 1 {
            return Duration::ZERO;
        }
        // 1x, 2x, 4x, ... capped at 30s.
        let factor = 1u32 << (attempt - 2).min(16);
        (self.base_backoff * factor).min(Duration::from_secs(30))
    }
}

/// Digest of (model id, request payload, decoding parameters); the key under
/// which responses are cached. Identical inputs produce identical keys.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey(String);

impl CacheKey {
    pub fn for_completion(model: &str, prompt: &str, decoding: &DecodingParams) -> Self {
        Self::digest(&["chat", model, prompt, &format!("{:?}", decoding)])
    }

    pub fn for_nli(model: &str, premise: &str, hypothesis: &str) -> Self {
        Self::digest(&["nli", model, premise, hypothesis])
    }

    pub fn for_embedding(model: &str, text: &str) -> Self {
        Self::digest(&["emb", model, text])
    }

    fn digest(parts: &[&str]) -> Self {
        let mut hasher = Sha256::new();
        for part in parts {
            hasher.update(part.as_bytes());
            hasher.update([0x1f]);
        }
        Self(hex::encode(hasher.finalize()))
    }

    pub fn as_hex(&self) -> &str {
        &self.0
    }
}

/// Counting semaphore bounding concurrent in-flight requests per provider.
struct Limiter {
    permits: Mutex<usize>,
    cv: Condvar,
}

impl Limiter {
    fn new(permits: usize) -> Self {
        Self {
            permits: Mutex::new(permits.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> LimiterGuard<'_> {
        let mut permits = self.permits.lock().expect("limiter poisoned");
        while *permits == 0 {
            permits = self.cv.wait(permits).expect("limiter poisoned");
        }
        *permits -= 1;
        LimiterGuard { limiter: self }
    }
}

struct LimiterGuard<'a> {
    limiter: &'a Limiter,
}

impl Drop for LimiterGuard<'_> {
    fn drop(&mut self) {
        let mut permits = self.limiter.permits.lock().expect("limiter poisoned");
        *permits += 1;
        self.limiter.cv.notify_one();
    }
}

pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;

#[derive(Debug, Clone)]
pub struct CompletionRequest {
    pub model: String,
    pub prompt: String,
    pub decoding: DecodingParams,
}

pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, GatewayError>;
}

pub trait NliBackend: Send + Sync {
    /// Probabilities over (entailment, contradiction, neutral).
    fn classify(&self, premise: &str, hypothesis: &str) -> Result<[f64; 3], GatewayError>;
}

pub trait EmbeddingBackend: Send + Sync {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, GatewayError>;
}

/// Shared plumbing for all three handle kinds: retries, limiter, counter.
#[derive(Clone)]
struct HandleCore {
    retry: RetryPolicy,
    limiter: Arc<Limiter>,
    calls: Arc<AtomicU64>,
    cache: Option<ResponseCache>,
}

impl HandleCore {
    fn new(retry: RetryPolicy) -> Self {
        Self {
            retry,
            limiter: Arc::new(Limiter::new(DEFAULT_MAX_IN_FLIGHT)),
            calls: Arc::new(AtomicU64::new(0)),
            cache: None,
        }
    }

    /// Run `call` with retries; counts each actual provider invocation.
    fn invoke<T>(
        &self,
        call: impl Fn() -> Result<T, GatewayError>,
    ) -> Result<T, GatewayError> {
        let mut last = String::new();
        for attempt in 1..=self.retry.max_attempts.max(1) {
            let pause = self.retry.backoff_before(attempt);
            if !pause.is_zero() {
                std::thread::sleep(pause);
            }
            let _permit = self.limiter.acquire();
            self.calls.fetch_add(1, Ordering::SeqCst);
            match call() {
                Ok(value) => return Ok(value),
                Err(GatewayError::Transient(reason)) => last = reason,
                Err(other) => return Err(other),
            }
        }
        Err(GatewayError::RetriesExhausted {
            attempts: self.retry.max_attempts.max(1),
            last,
        })
    }

    fn cached(&self, key: &CacheKey) -> Option<String> {
        self.cache.as_ref().and_then(|c| c.get(key))
    }

    fn store(&self, key: &CacheKey, value: &str) {
        if let Some(cache) = &self.cache {
            // Cache I/O failures are non-fatal; the response is still returned.
            if let Err(err) = cache.put(key, value) {
                log::warn!("response cache write failed for {}: {err}", key.as_hex());
            }
        }
    }
}

/// Handle to a chat-completion provider.
#[derive(Clone)]
pub struct LlmHandle {
    model_id: String,
    decoding: DecodingParams,
    backend: Arc<dyn ChatBackend>,
    core: HandleCore,
}

impl LlmHandle {
    pub fn new(model_id: impl Into<String>, backend: Arc<dyn ChatBackend>) -> Self {
        Self {
            model_id: model_id.into(),
            decoding: DecodingParams::default(),
            backend,
            core: HandleCore::new(RetryPolicy::default()),
        }
    }

    /// Strict deterministic mock: unmatched prompts are errors.
    pub fn mock(script: MockScript) -> Self {
        Self::from_mock(script, true)
    }

    /// Lenient mock: unmatched prompts echo [`MOCK_SENTINEL`].
    pub fn mock_lenient(script: MockScript) -> Self {
        Self::from_mock(script, false)
    }

    /// Strict mock answering each exact prompt with the paired response.
    pub fn mock_from_pairs(pairs: &[(&str, &str)]) -> Self {
        Self::mock(MockScript::from_pairs(pairs))
    }

    /// Load a mock script file (strict mode).
    pub fn mock_from_script(path: &std::path::Path) -> Result<Self, GatewayError> {
        Ok(Self::mock(MockScript::load(path)?))
    }

    fn from_mock(script: MockScript, strict: bool) -> Self {
        let mut handle = Self::new("mock", Arc::new(script.into_chat(strict)));
        handle.core.retry = RetryPolicy::immediate(3);
        handle
    }

    pub fn with_model_id(mut self, model_id: impl Into<String>) -> Self {
        self.model_id = model_id.into();
        self
    }

    pub fn with_decoding(mut self, decoding: DecodingParams) -> Self {
        self.decoding = decoding;
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.core.retry = retry;
        self
    }

    pub fn with_cache(mut self, cache: ResponseCache) -> Self {
        self.core.cache = Some(cache);
        self
    }

    pub fn with_max_in_flight(mut self, permits: usize) -> Self {
        self.core.limiter = Arc::new(Limiter::new(permits));
        self
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    /// Number of actual provider invocations (cache hits do not count).
    pub fn provider_calls(&self) -> u64 {
        self.core.calls.load(Ordering::SeqCst)
    }

    /// Complete `prompt`, consulting the cache first and retrying transient
    /// failures per the handle's policy. Successful responses are persisted.
    pub fn complete(&self, prompt: &str) -> Result<String, GatewayError> {
        let key = CacheKey::for_completion(&self.model_id, prompt, &self.decoding);
        if let Some(hit) = self.core.cached(&key) {
            return Ok(hit);
        }
        let request = CompletionRequest {
            model: self.model_id.clone(),
            prompt: prompt.to_string(),
            decoding: self.decoding.clone(),
        };
        let response = self.core.invoke(|| self.backend.complete(&request))?;
        self.core.store(&key, &response);
        Ok(response)
    }
}

/// Handle to a natural-language-inference provider.
#[derive(Clone)]
pub struct NliHandle {
    model_id: String,
    backend: Arc<dyn NliBackend>,
    core: HandleCore,
}

impl NliHandle {
    pub fn new(model_id: impl Into<String>, backend: Arc<dyn NliBackend>) -> Self {
        Self {
            model_id: model_id.into(),
            backend,
            core: HandleCore::new(RetryPolicy::default()),
        }
    }

    pub fn mock(mock: MockNli) -> Self {
        let mut handle = Self::new("mock-nli", Arc::new(mock));
        handle.core.retry = RetryPolicy::immediate(3);
        handle
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.core.retry = retry;
        self
    }

    pub fn with_cache(mut self, cache: ResponseCache) -> Self {
        self.core.cache = Some(cache);
        self
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn provider_calls(&self) -> u64 {
        self.core.calls.load(Ordering::SeqCst)
    }

    /// Probabilities over (entailment, contradiction, neutral).
    pub fn classify(&self, premise: &str, hypothesis: &str) -> Result<[f64; 3], GatewayError> {
        let key = CacheKey::for_nli(&self.model_id, premise, hypothesis);
        if let Some(hit) = self.core.cached(&key) {
            if let Ok(probs) = serde_json::from_str::<[f64; 3]>(&hit) {
                return Ok(probs);
            }
        }
        let probs = self
            .core
            .invoke(|| self.backend.classify(premise, hypothesis))?;
        self.core
            .store(&key, &serde_json::to_string(&probs).expect("serializable"));
        Ok(probs)
    }
}

/// Handle to a text-embedding provider with a declared dimensionality.
#[derive(Clone)]
pub struct EmbeddingHandle {
    model_id: String,
    dimension: usize,
    backend: Arc<dyn EmbeddingBackend>,
    core: HandleCore,
}

impl EmbeddingHandle {
    pub fn new(
        model_id: impl Into<String>,
        dimension: usize,
        backend: Arc<dyn EmbeddingBackend>,
    ) -> Self {
        Self {
            model_id: model_id.into(),
            dimension,
            backend,
            core: HandleCore::new(RetryPolicy::default()),
        }
    }

    pub fn mock(mock: MockEmbedding) -> Self {
        let dimension = mock.dimension();
        let mut handle = Self::new("mock-embedding", dimension, Arc::new(mock));
        handle.core.retry = RetryPolicy::immediate(3);
        handle
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.core.retry = retry;
        self
    }

    pub fn with_cache(mut self, cache: ResponseCache) -> Self {
        self.core.cache = Some(cache);
        self
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn provider_calls(&self) -> u64 {
        self.core.calls.load(Ordering::SeqCst)
    }

    /// Embed `texts`, one vector per text in order. Cached per text; only
    /// cache misses reach the provider. Every vector is checked against the
    /// declared dimensionality.
    pub fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, GatewayError> {
        let mut out: Vec<Option<Vec<f64>>> = vec![None; texts.len()];
        let mut missing: Vec<usize> = Vec::new();
        for (i, text) in texts.iter().enumerate() {
            let key = CacheKey::for_embedding(&self.model_id, text);
            match self.core.cached(&key) {
                Some(hit) => match serde_json::from_str::<Vec<f64>>(&hit) {
                    Ok(vector) if vector.len() == self.dimension => out[i] = Some(vector),
                    _ => missing.push(i),
                },
                None => missing.push(i),
            }
        }
        if !missing.is_empty() {
            let batch: Vec<String> = missing.iter().map(|&i| texts[i].clone()).collect();
            let vectors = self.core.invoke(|| self.backend.embed(&batch))?;
            if vectors.len() != batch.len() {
                return Err(GatewayError::Permanent(format!(
                    "embedding provider returned {} vectors for {} texts",
                    vectors.len(),
                    batch.len()
                )));
            }
            for (&i, vector) in missing.iter().zip(vectors) {
                if vector.len() != self.dimension {
                    return Err(GatewayError::DimensionMismatch {
                        declared: self.dimension,
                        got: vector.len(),
                    });
                }
                let key = CacheKey::for_embedding(&self.model_id, &texts[i]);
                self.core
                    .store(&key, &serde_json::to_string(&vector).expect("serializable"));
                out[i] = Some(vector);
            }
        }
        Ok(out.into_iter().map(|v| v.expect("filled above")).collect())
    }
}
