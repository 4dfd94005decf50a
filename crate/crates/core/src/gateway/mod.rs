//! Provider abstraction for text generation and token log-probability scoring.
//!
//! All providers speak the same two operations. [`ScriptedProvider`] replays
//! canned generations and scores text with a declared character-bigram
//! model; [`HttpProvider`] talks the JSON wire protocol in [`wire`] to a live
//! service. [`Gateway`] wraps any provider with bounded concurrency and
//! retries of transport failures.

mod bigram;
mod http;
mod scripted;
pub mod wire;

use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use bigram::{BigramModel, ALPHABET_SIZE};
pub use http::HttpProvider;
pub use scripted::{glob_match, Matcher, ScriptEntry, ScriptFile, ScriptedProvider};

/// Maximum permitted gap between a provider's whole-sequence log-probability
/// and the sum of its per-token log-probabilities.
pub const SEQUENCE_SUM_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenRequest {
    pub prompt: String,
    pub max_tokens: u32,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<Vec<String>>,
    /// Free-form label used for logging and script matching.
    #[serde(default)]
    pub tag: String,
}

impl GenRequest {
    pub fn new(prompt: impl Into<String>, tag: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            max_tokens: 512,
            temperature: 0.0,
            stop: None,
            tag: tag.into(),
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.max_tokens < 1 {
            return Err(GatewayError::InvalidRequest("max_tokens must be at least 1".into()));
        }
        if !(self.temperature >= 0.0) {
            return Err(GatewayError::InvalidRequest("temperature must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenResponse {
    pub text: String,
    pub provider: String,
    pub latency_ms: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub truncated: bool,
}

/// Per-token natural-log probabilities of a continuation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenScore {
    pub tokens: Vec<String>,
    pub logprobs: Vec<f64>,
    pub m: usize,
    /// Whole-sequence log-probability when the provider reports one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence_logprob: Option<f64>,
}

impl TokenScore {
    pub fn new(tokens: Vec<String>, logprobs: Vec<f64>, sequence_logprob: Option<f64>) -> Result<Self, GatewayError> {
        let score = Self {
            m: logprobs.len(),
            tokens,
            logprobs,
            sequence_logprob,
        };
        score.check()?;
        Ok(score)
    }

    /// Shape and range checks, plus the sequence-sum conformance check.
    pub fn check(&self) -> Result<(), GatewayError> {
        if self.m == 0 || self.tokens.len() != self.m || self.logprobs.len() != self.m {
            return Err(GatewayError::Protocol(format!(
                "score shape mismatch: {} tokens, {} logprobs, m={}",
                self.tokens.len(),
                self.logprobs.len(),
                self.m
            )));
        }
        if let Some(bad) = self.logprobs.iter().find(|lp| !(**lp <= 0.0)) {
            return Err(GatewayError::Protocol(format!("log-probability {bad} is not <= 0")));
        }
        if let Some(seq) = self.sequence_logprob {
            let gap = (self.sum() - seq).abs();
            if !(gap <= SEQUENCE_SUM_TOLERANCE) {
                return Err(GatewayError::Protocol(format!(
                    "per-token sum {} differs from sequence log-probability {seq} by {gap}",
                    self.sum()
                )));
            }
        }
        Ok(())
    }

    pub fn sum(&self) -> f64 {
        self.logprobs.iter().sum()
    }

    /// Average negative log-likelihood over the scored tokens.
    pub fn mean_nll(&self) -> f64 {
        -self.sum() / self.m as f64
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GatewayError {
    /// Connection-level or server-side failure; safe to retry.
    #[error("transport error: {0}")]
    Transport(String),
    /// Malformed or rejected exchange; retrying will not help.
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("script miss: no scripted response for tag `{tag}`")]
    ScriptMiss { tag: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

impl GatewayError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, GatewayError::Transport(_))
    }
}

pub trait Provider: Send + Sync {
    fn name(&self) -> &str;

    fn generate(&self, req: &GenRequest) -> Result<GenResponse, GatewayError>;

    /// Scores `continuation` given `context`. Tokenisation is provider-owned.
    fn score_continuation(&self, context: &str, continuation: &str) -> Result<TokenScore, GatewayError>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_delay: Duration::from_millis(200),
        }
    }
}

impl RetryPolicy {
    pub fn no_delay() -> Self {
        Self {
            base_delay: Duration::ZERO,
            ..Self::default()
        }
    }

    fn delay_before(&self, attempt: u32) -> Duration {
        self.base_delay * 2u32.saturating_pow(attempt.saturating_sub(2))
    }
}

/// Counting semaphore bounding in-flight provider calls.
#[derive(Debug)]
struct Limiter {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Limiter {
    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Limiter);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

/// Shared handle to a provider with a concurrency bound and retry policy.
#[derive(Clone)]
pub struct Gateway {
    provider: Arc<dyn Provider>,
    limiter: Arc<Limiter>,
    limit: usize,
    retry: RetryPolicy,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("provider", &self.provider.name())
            .field("limit", &self.limit)
            .field("retry", &self.retry)
            .finish()
    }
}

impl Gateway {
    pub fn new(provider: Arc<dyn Provider>, concurrency_limit: usize) -> Self {
        let limit = concurrency_limit.max(1);
        Self {
            provider,
            limiter: Arc::new(Limiter {
                free: Mutex::new(limit),
                cv: Condvar::new(),
            }),
            limit,
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn concurrency_limit(&self) -> usize {
        self.limit
    }

    pub fn provider_name(&self) -> &str {
        self.provider.name()
    }

    pub fn generate(&self, req: &GenRequest) -> Result<GenResponse, GatewayError> {
        req.validate()?;
        self.with_retries(&req.tag, || self.provider.generate(req))
    }

    pub fn score_continuation(&self, context: &str, continuation: &str) -> Result<TokenScore, GatewayError> {
        if continuation.is_empty() {
            return Err(GatewayError::InvalidRequest("continuation must be non-empty".into()));
        }
        let score = self.with_retries("score", || self.provider.score_continuation(context, continuation))?;
        score.check()?;
        Ok(score)
    }

    fn with_retries<T>(&self, label: &str, mut call: impl FnMut() -> Result<T, GatewayError>) -> Result<T, GatewayError> {
        let mut attempt = 1;
        loop {
            let result = {
                let _permit = self.limiter.acquire();
                call()
            };
            match result {
                Err(e) if e.is_retryable() && attempt < self.retry.max_attempts => {
                    attempt += 1;
                    let delay = self.retry.delay_before(attempt);
                    log::warn!("{label}: {e}; retrying (attempt {attempt}) after {delay:?}");
                    thread::sleep(delay);
                }
                other => return other,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Flaky {
        calls: AtomicUsize,
        fail_first: usize,
        error: GatewayError,
    }

    impl Provider for Flaky {
        fn name(&self) -> &str {
            "flaky"
        }

        fn generate(&self, _req: &GenRequest) -> Result<GenResponse, GatewayError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.fail_first {
                return Err(self.error.clone());
            }
            Ok(GenResponse {
                text: "ok".into(),
                provider: "flaky".into(),
                latency_ms: 0.0,
                truncated: false,
            })
        }

        fn score_continuation(&self, _: &str, _: &str) -> Result<TokenScore, GatewayError> {
            Err(self.error.clone())
        }
    }

    fn flaky(fail_first: usize, error: GatewayError) -> (Arc<Flaky>, Gateway) {
        let p = Arc::new(Flaky {
            calls: AtomicUsize::new(0),
            fail_first,
            error,
        });
        let gw = Gateway::new(p.clone(), 2).with_retry(RetryPolicy::no_delay());
        (p, gw)
    }

    #[test]
    fn transport_errors_are_retried_up_to_three_attempts() {
        let (p, gw) = flaky(2, GatewayError::Transport("reset".into()));
        assert_eq!(gw.generate(&GenRequest::new("p", "t")).unwrap().text, "ok");
        assert_eq!(p.calls.load(Ordering::SeqCst), 3);

        let (p, gw) = flaky(5, GatewayError::Transport("reset".into()));
        assert!(matches!(gw.generate(&GenRequest::new("p", "t")), Err(GatewayError::Transport(_))));
        assert_eq!(p.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn protocol_errors_are_not_retried() {
        let (p, gw) = flaky(5, GatewayError::Protocol("bad".into()));
        assert!(matches!(gw.generate(&GenRequest::new("p", "t")), Err(GatewayError::Protocol(_))));
        assert_eq!(p.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn request_validation() {
        let mut req = GenRequest::new("p", "t");
        req.max_tokens = 0;
        assert!(req.validate().is_err());
        let mut req = GenRequest::new("p", "t");
        req.temperature = -0.1;
        assert!(req.validate().is_err());
    }

    #[test]
    fn empty_continuation_is_rejected() {
        let (_, gw) = flaky(0, GatewayError::Protocol("x".into()));
        assert!(matches!(gw.score_continuation("ctx", ""), Err(GatewayError::InvalidRequest(_))));
    }

    #[test]
    fn token_score_checks() {
        assert!(TokenScore::new(vec!["a".into()], vec![-0.5], Some(-0.5)).is_ok());
        assert!(TokenScore::new(vec![], vec![], None).is_err());
        assert!(TokenScore::new(vec!["a".into()], vec![0.1], None).is_err());
        assert!(TokenScore::new(vec!["a".into()], vec![-0.5], Some(-0.6)).is_err());
        let s = TokenScore::new(vec!["a".into(), "b".into()], vec![-1.0, -3.0], None).unwrap();
        assert_eq!(s.mean_nll(), 2.0);
    }

    #[test]
    fn limiter_bounds_in_flight_calls() {
        struct Probe {
            live: AtomicUsize,
            peak: AtomicUsize,
        }
        impl Provider for Probe {
            fn name(&self) -> &str {
                "probe"
            }
            fn generate(&self, _req: &GenRequest) -> Result<GenResponse, GatewayError> {
                let now = self.live.fetch_add(1, Ordering::SeqCst) + 1;
                self.peak.fetch_max(now, Ordering::SeqCst);
                thread::sleep(Duration::from_millis(5));
                self.live.fetch_sub(1, Ordering::SeqCst);
                Ok(GenResponse {
                    text: String::new(),
                    provider: "probe".into(),
                    latency_ms: 0.0,
                    truncated: true,
                })
            }
            fn score_continuation(&self, _: &str, _: &str) -> Result<TokenScore, GatewayError> {
                unreachable!()
            }
        }
        let probe = Arc::new(Probe {
            live: AtomicUsize::new(0),
            peak: AtomicUsize::new(0),
        });
        let gw = Gateway::new(probe.clone(), 3);
        thread::scope(|s| {
            for _ in 0..12 {
                let gw = gw.clone();
                s.spawn(move || gw.generate(&GenRequest::new("p", "t")).unwrap());
            }
        });
        assert!(probe.peak.load(Ordering::SeqCst) <= 3);
    }
}
