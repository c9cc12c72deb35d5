//! Uniform access to summarizer, selector, generator and embedder roles.
//!
//! Each role is served by a [`Backend`] (the deterministic [`MockBackend`] or
//! the HTTP [`RemoteBackend`]). The [`Gateway`] wraps the backends with:
//!
//! * a response cache keyed by the request digest, so an identical request
//!   never reaches a provider twice;
//! * jittered exponential backoff on retryable provider errors;
//! * one corrective retry when a selector or generator answer is unusable;
//! * a bound on in-flight provider requests shared by all callers.

mod cache;
pub mod mock;
pub mod prompts;
pub mod remote;
mod requests;
pub mod tokens;

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use parking_lot::{Condvar, Mutex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::{request_digest, CachedResponse, ResponseCache};
pub use mock::MockBackend;
pub use prompts::PromptTemplates;
pub use remote::{RemoteBackend, RemoteConfig};
pub use requests::{
    Candidate, ChainContext, ChainEntry, EmbeddingRequest, GenerationMode, GenerationOutput, GenerationRequest,
    SelectionRequest, SummaryRequest,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("provider error ({}): {message}", if *.retryable { "retryable" } else { "fatal" })]
    Provider { retryable: bool, message: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("cache error: {0}")]
    Cache(String),
}

impl GatewayError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, GatewayError::Provider { retryable: true, .. })
    }
}

/// A provider for the four model roles. Text-producing methods return the
/// raw model output; the gateway parses and validates it.
pub trait Backend: Send + Sync {
    /// Stable identifier, part of every cache key.
    fn name(&self) -> &str;
    fn summarize(&self, req: &SummaryRequest) -> Result<String, GatewayError>;
    fn select(&self, req: &SelectionRequest) -> Result<String, GatewayError>;
    fn generate(&self, req: &GenerationRequest) -> Result<String, GatewayError>;
    fn embed(&self, req: &EmbeddingRequest) -> Result<Vec<f64>, GatewayError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Summarizer,
    Selector,
    Generator,
    Embedder,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::Summarizer, Role::Selector, Role::Generator, Role::Embedder];

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Summarizer => "summarizer",
            Role::Selector => "selector",
            Role::Generator => "generator",
            Role::Embedder => "embedder",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Mock,
    Remote,
}

#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(8),
        }
    }
}

pub const DEFAULT_MAX_IN_FLIGHT: usize = 8;

/// Counting semaphore bounding concurrent provider requests.
struct Limiter {
    available: Mutex<usize>,
    cv: Condvar,
}

impl Limiter {
    fn new(n: usize) -> Self {
        Limiter {
            available: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.available.lock();
        while *n == 0 {
            self.cv.wait(&mut n);
        }
        *n -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Limiter);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.available.lock() += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleStats {
    /// Requests answered, from cache or provider.
    pub requests: usize,
    /// Provider invocations, retries included.
    pub provider_calls: usize,
    pub cache_hits: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatewayStats {
    pub summarizer: RoleStats,
    pub selector: RoleStats,
    pub generator: RoleStats,
    pub embedder: RoleStats,
}

impl GatewayStats {
    pub fn role(&self, role: Role) -> RoleStats {
        match role {
            Role::Summarizer => self.summarizer,
            Role::Selector => self.selector,
            Role::Generator => self.generator,
            Role::Embedder => self.embedder,
        }
    }
}

#[derive(Default)]
struct Counters {
    requests: [AtomicUsize; 4],
    provider_calls: [AtomicUsize; 4],
    cache_hits: [AtomicUsize; 4],
}

pub struct GatewayBuilder {
    backends: [Arc<dyn Backend>; 4],
    cache: Option<Arc<ResponseCache>>,
    retry: RetryPolicy,
    max_in_flight: usize,
    seed: u64,
}

impl GatewayBuilder {
    pub fn backend(mut self, role: Role, backend: Arc<dyn Backend>) -> Self {
        self.backends[role.index()] = backend;
        self
    }

    pub fn all_backends(mut self, backend: Arc<dyn Backend>) -> Self {
        self.backends = std::array::from_fn(|_| backend.clone());
        self
    }

    pub fn cache(mut self, cache: Arc<ResponseCache>) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn max_in_flight(mut self, n: usize) -> Self {
        self.max_in_flight = n;
        self
    }

    /// Seeds the backoff jitter.
    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn build(self) -> Gateway {
        Gateway {
            backends: self.backends,
            cache: self.cache,
            retry: self.retry,
            limiter: Limiter::new(self.max_in_flight),
            jitter: Mutex::new(ChaCha8Rng::seed_from_u64(self.seed)),
            counters: Counters::default(),
        }
    }
}

pub struct Gateway {
    backends: [Arc<dyn Backend>; 4],
    cache: Option<Arc<ResponseCache>>,
    retry: RetryPolicy,
    limiter: Limiter,
    jitter: Mutex<ChaCha8Rng>,
    counters: Counters,
}

impl fmt::Debug for Gateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gateway")
            .field("backends", &self.backends.iter().map(|b| b.name().to_string()).collect::<Vec<_>>())
            .field("cached", &self.cache.is_some())
            .finish()
    }
}

impl Gateway {
    pub fn builder() -> GatewayBuilder {
        let mock: Arc<dyn Backend> = Arc::new(MockBackend::new());
        GatewayBuilder {
            backends: std::array::from_fn(|_| mock.clone()),
            cache: None,
            retry: RetryPolicy::default(),
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
            seed: 0,
        }
    }

    /// All roles served by the mock backend, no cache.
    pub fn mock() -> Self {
        Self::builder().build()
    }

    pub fn backend_name(&self, role: Role) -> &str {
        self.backends[role.index()].name()
    }

    pub fn stats(&self) -> GatewayStats {
        let get = |r: Role| RoleStats {
            requests: self.counters.requests[r.index()].load(Ordering::Relaxed),
            provider_calls: self.counters.provider_calls[r.index()].load(Ordering::Relaxed),
            cache_hits: self.counters.cache_hits[r.index()].load(Ordering::Relaxed),
        };
        GatewayStats {
            summarizer: get(Role::Summarizer),
            selector: get(Role::Selector),
            generator: get(Role::Generator),
            embedder: get(Role::Embedder),
        }
    }

    pub fn cache(&self) -> Option<&ResponseCache> {
        self.cache.as_deref()
    }

    /// Runs `call` with caching, the in-flight bound, and backoff retries.
    fn dispatch<Req: Serialize>(
        &self,
        role: Role,
        req: &Req,
        call: impl Fn(&dyn Backend) -> Result<CachedResponse, GatewayError>,
    ) -> Result<CachedResponse, GatewayError> {
        let idx = role.index();
        self.counters.requests[idx].fetch_add(1, Ordering::Relaxed);
        let backend = &*self.backends[idx];
        let key = self
            .cache
            .as_ref()
            .map(|_| request_digest(&role.to_string(), backend.name(), req));
        if let (Some(cache), Some(key)) = (&self.cache, &key) {
            if let Some(hit) = cache.get(key) {
                self.counters.cache_hits[idx].fetch_add(1, Ordering::Relaxed);
                return Ok(hit);
            }
        }
        let mut attempt = 0;
        let response = loop {
            attempt += 1;
            let result = {
                let _permit = self.limiter.acquire();
                self.counters.provider_calls[idx].fetch_add(1, Ordering::Relaxed);
                call(backend)
            };
            match result {
                Err(e) if e.is_retryable() && attempt < self.retry.attempts => {
                    thread::sleep(self.backoff(attempt));
                }
                other => break other?,
            }
        };
        if let (Some(cache), Some(key)) = (&self.cache, key) {
            cache.insert(key, response.clone())?;
        }
        Ok(response)
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let exp = self.retry.base_delay.saturating_mul(1 << (attempt - 1).min(16));
        let capped = exp.min(self.retry.max_delay);
        let factor: f64 = self.jitter.lock().gen_range(0.5..1.0);
        capped.mul_f64(factor)
    }

    fn text(&self, role: Role, r: CachedResponse) -> Result<String, GatewayError> {
        match r {
            CachedResponse::Text(t) => Ok(t),
            CachedResponse::Embedding(_) => Err(GatewayError::Cache(format!("{role} entry holds an embedding"))),
        }
    }

    /// Nonempty summary of at most `budget` words.
    pub fn summarize(&self, req: &SummaryRequest) -> Result<String, GatewayError> {
        let raw = self.dispatch(Role::Summarizer, req, |b| b.summarize(req).map(CachedResponse::Text))?;
        let text = self.text(Role::Summarizer, raw)?;
        let words: Vec<&str> = text.split_whitespace().collect();
        if words.is_empty() {
            return Err(GatewayError::MalformedResponse("empty summary".into()));
        }
        if words.len() > req.budget() {
            return Ok(words[..req.budget()].join(" "));
        }
        Ok(text.trim().to_string())
    }

    /// Picks one candidate id, or `None` when the request allows it and the
    /// selector declines. Answers outside the candidate set get one
    /// corrective retry.
    pub fn select(&self, req: &SelectionRequest) -> Result<Option<String>, GatewayError> {
        if req.candidates().len() == 1 && !req.allow_none() {
            self.counters.requests[Role::Selector.index()].fetch_add(1, Ordering::Relaxed);
            return Ok(Some(req.candidates()[0].id.clone()));
        }
        let mut current = req.clone();
        for attempt in 0..2 {
            let raw = self.dispatch(Role::Selector, &current, |b| b.select(&current).map(CachedResponse::Text))?;
            let text = self.text(Role::Selector, raw)?;
            match parse_selection(&current, &text) {
                Ok(choice) => return Ok(choice),
                Err(reason) if attempt == 0 => current = req.with_correction(reason),
                Err(reason) => return Err(GatewayError::MalformedResponse(reason)),
            }
        }
        unreachable!("loop returns on second attempt")
    }

    /// Navigate mode yields a waypoint and reasoning; explain mode free text.
    /// Unparseable navigate output gets one corrective retry.
    pub fn generate(&self, req: &GenerationRequest) -> Result<GenerationOutput, GatewayError> {
        let mut current = req.clone();
        for attempt in 0..2 {
            let raw = self.dispatch(Role::Generator, &current, |b| b.generate(&current).map(CachedResponse::Text))?;
            let text = self.text(Role::Generator, raw)?;
            let parsed = match req.mode() {
                GenerationMode::Navigate => parse_navigation(&text),
                GenerationMode::Explain if text.trim().is_empty() => Err("empty answer".to_string()),
                GenerationMode::Explain => Ok(GenerationOutput::Explain {
                    text: text.trim().to_string(),
                }),
            };
            match parsed {
                Ok(out) => return Ok(out),
                Err(reason) if attempt == 0 => current = req.with_correction(reason),
                Err(reason) => return Err(GatewayError::MalformedResponse(reason)),
            }
        }
        unreachable!("loop returns on second attempt")
    }

    /// Unit-norm embedding.
    pub fn embed(&self, req: &EmbeddingRequest) -> Result<Vec<f64>, GatewayError> {
        let raw = self.dispatch(Role::Embedder, req, |b| b.embed(req).map(CachedResponse::Embedding))?;
        let CachedResponse::Embedding(mut v) = raw else {
            return Err(GatewayError::Cache("embedder entry holds text".into()));
        };
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if v.is_empty() || !norm.is_finite() || norm == 0.0 {
            return Err(GatewayError::MalformedResponse("embedding has no direction".into()));
        }
        if (norm - 1.0).abs() > 1e-12 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(v)
    }
}

fn parse_selection(req: &SelectionRequest, text: &str) -> Result<Option<String>, String> {
    let cleaned = text
        .trim()
        .trim_matches(|c: char| c == '`' || c == '"' || c == '\'' || c == '[' || c == ']' || c == '.')
        .trim();
    if cleaned.eq_ignore_ascii_case(mock::NONE_ANSWER) {
        return if req.allow_none() {
            Ok(None)
        } else {
            Err("NONE is not allowed; choose one of the option ids".into())
        };
    }
    if req.contains(cleaned) {
        return Ok(Some(cleaned.to_string()));
    }
    // tolerate chatty answers that name exactly one candidate
    let mentioned: Vec<&Candidate> = req
        .candidates()
        .iter()
        .filter(|c| text.split(|ch: char| ch.is_whitespace() || "[]`\"',.:()".contains(ch)).any(|w| w == c.id))
        .collect();
    match mentioned.as_slice() {
        [one] => Ok(Some(one.id.clone())),
        _ => Err(format!("`{}` is not one of the option ids", text.trim())),
    }
}

fn parse_navigation(text: &str) -> Result<GenerationOutput, String> {
    #[derive(Deserialize)]
    struct Nav {
        waypoint: Value,
        reasoning: Option<String>,
    }
    use serde_json::Value;
    let (start, end) = match (text.find('{'), text.rfind('}')) {
        (Some(s), Some(e)) if s < e => (s, e),
        _ => return Err("expected a JSON object with `waypoint` and `reasoning`".into()),
    };
    let nav: Nav = serde_json::from_str(&text[start..=end]).map_err(|e| format!("invalid JSON object: {e}"))?;
    let waypoint = match nav.waypoint {
        Value::String(s) if !s.trim().is_empty() => s.trim().to_string(),
        Value::Number(n) => n.to_string(),
        _ => return Err("missing `waypoint` field".into()),
    };
    Ok(GenerationOutput::Navigate {
        waypoint,
        reasoning: nav.reasoning.unwrap_or_default(),
    })
}
