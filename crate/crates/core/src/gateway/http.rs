use std::time::{Duration, Instant};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::wire::{self, ErrorReply, GenerateBody, GenerateReply, ScoreBody, ScoreReply};
use super::{GatewayError, GenRequest, GenResponse, Provider, TokenScore};

/// Client for a live provider speaking the [`wire`] protocol.
///
/// 5xx replies and connection failures map to [`GatewayError::Transport`]
/// (retried by the [`super::Gateway`]); 4xx replies and malformed bodies
/// map to [`GatewayError::Protocol`].
pub struct HttpProvider {
    base_url: String,
    bearer: Option<String>,
    agent: ureq::Agent,
}

impl std::fmt::Debug for HttpProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpProvider")
            .field("base_url", &self.base_url)
            .field("bearer", &self.bearer.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

impl HttpProvider {
    pub fn new(base_url: impl Into<String>, bearer: Option<String>) -> Self {
        Self::with_timeout(base_url, bearer, Duration::from_secs(120))
    }

    pub fn with_timeout(base_url: impl Into<String>, bearer: Option<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            bearer,
            agent,
        }
    }

    fn post<B: Serialize, R: DeserializeOwned>(&self, path: &str, body: &B) -> Result<R, GatewayError> {
        let url = format!("{}{path}", self.base_url);
        let payload = serde_json::to_string(body).map_err(|e| GatewayError::Protocol(e.to_string()))?;
        let mut req = self.agent.post(&url).header("Content-Type", "application/json");
        if let Some(token) = &self.bearer {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let mut resp = req
            .send(payload)
            .map_err(|e| GatewayError::Transport(format!("{url}: {e}")))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| GatewayError::Transport(format!("{url}: reading body: {e}")))?;
        if !(200..300).contains(&status) {
            let detail = serde_json::from_str::<ErrorReply>(&text)
                .map(|r| format!("{}: {}", r.error.code, r.error.message))
                .unwrap_or(text);
            let msg = format!("{url}: HTTP {status}: {detail}");
            return Err(if status >= 500 {
                GatewayError::Transport(msg)
            } else {
                GatewayError::Protocol(msg)
            });
        }
        serde_json::from_str(&text).map_err(|e| GatewayError::Protocol(format!("{url}: malformed reply: {e}")))
    }
}

impl Provider for HttpProvider {
    fn name(&self) -> &str {
        "http"
    }

    fn generate(&self, req: &GenRequest) -> Result<GenResponse, GatewayError> {
        let started = Instant::now();
        let body = GenerateBody {
            prompt: req.prompt.clone(),
            max_tokens: req.max_tokens,
            temperature: req.temperature,
            stop: req.stop.clone().unwrap_or_default(),
        };
        let reply: GenerateReply = self.post(wire::GENERATE_PATH, &body)?;
        Ok(GenResponse {
            text: reply.text,
            provider: self.base_url.clone(),
            latency_ms: started.elapsed().as_secs_f64() * 1e3,
            truncated: reply.truncated,
        })
    }

    fn score_continuation(&self, context: &str, continuation: &str) -> Result<TokenScore, GatewayError> {
        let body = ScoreBody {
            context: context.to_string(),
            continuation: continuation.to_string(),
        };
        let reply: ScoreReply = self.post(wire::SCORE_PATH, &body)?;
        TokenScore::new(reply.tokens, reply.logprobs, reply.sequence_logprob)
    }
}
