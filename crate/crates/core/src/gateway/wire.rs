//! JSON bodies of the HTTP wire protocol.
//!
//! ```text
//! POST /v1/generate  {prompt, max_tokens, temperature, stop[]} -> {text}
//! POST /v1/score     {context, continuation}                   -> {tokens[], logprobs[]}
//! errors             {error: {code, message}} with HTTP 4xx/5xx
//! ```

use serde::{Deserialize, Serialize};

pub const GENERATE_PATH: &str = "/v1/generate";
pub const SCORE_PATH: &str = "/v1/score";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateBody {
    pub prompt: String,
    pub max_tokens: u32,
    pub temperature: f64,
    #[serde(default)]
    pub stop: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateReply {
    pub text: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreBody {
    pub context: String,
    pub continuation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReply {
    pub tokens: Vec<String>,
    pub logprobs: Vec<f64>,
    /// Optional whole-sequence log-probability for conformance checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence_logprob: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDetail {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReply {
    pub error: ErrorDetail,
}

impl ErrorReply {
    pub fn new(code: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            error: ErrorDetail {
                code: code.into(),
                message: message.into(),
            },
        }
    }
}
