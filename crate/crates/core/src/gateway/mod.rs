//! Embedder, reranker and chat model behind one set of traits, with
//! OpenAI-compatible HTTP clients and deterministic local stubs.

mod remote;
mod stub;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use remote::{GatewayConfig, HttpChat, HttpEmbedder, HttpReranker, RetryPolicy};
pub use stub::{
    tokenize, AdaptiveChat, HashingEmbedder, JaccardReranker, ScriptedChat, Unavailable,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RejectReason {
    /// Upstream answered with a non-retryable status.
    Status(String),
    /// The request was refused locally before any network call.
    InvalidInput(String),
    /// A scripted chat stub has no turns left.
    ScriptExhausted,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GatewayError {
    #[error("upstream unavailable: {0}")]
    UpstreamUnavailable(String),
    #[error("upstream rejected request (status {status:?}): {reason:?}")]
    UpstreamRejected { status: Option<u16>, reason: RejectReason },
    #[error("request exceeds the model context: {0}")]
    ContextOverflow(String),
}

impl GatewayError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        GatewayError::UpstreamRejected { status: None, reason: RejectReason::InvalidInput(msg.into()) }
    }

    pub fn is_retryable(&self) -> bool {
        matches!(self, GatewayError::UpstreamUnavailable(_))
    }

    pub fn is_script_exhausted(&self) -> bool {
        matches!(self, GatewayError::UpstreamRejected { reason: RejectReason::ScriptExhausted, .. })
    }
}

pub trait Embedder: Send + Sync {
    fn dimension(&self) -> usize;

    /// One unit vector per text, in input order.
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, GatewayError>;

    fn embed(&self, text: &str) -> Result<Vec<f32>, GatewayError> {
        let mut v = self.embed_batch(&[text.to_owned()])?;
        v.pop().ok_or_else(|| GatewayError::UpstreamUnavailable("empty embedding response".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankRequest {
    pub query: String,
    pub candidates: Vec<String>,
}

pub trait Reranker: Send + Sync {
    /// Scores in `[0, 1]`, parallel to `req.candidates`.
    fn rerank(&self, req: &RerankRequest) -> Result<Vec<f32>, GatewayError>;
}

pub trait ChatModel: Send + Sync {
    fn chat_complete(&self, req: &ChatRequest) -> Result<ChatMessage, GatewayError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub name: String,
    pub arguments: Value,
    pub id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    #[serde(default)]
    pub content: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_calls: Vec<ToolCall>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_call_id: Option<String>,
}

impl ChatMessage {
    fn plain(role: Role, content: impl Into<String>) -> Self {
        Self { role, content: content.into(), tool_calls: Vec::new(), tool_call_id: None }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Self::plain(Role::System, content)
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self::plain(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self::plain(Role::Assistant, content)
    }

    pub fn tool_calls(calls: Vec<ToolCall>) -> Self {
        Self { tool_calls: calls, ..Self::plain(Role::Assistant, "") }
    }

    pub fn tool_result(call_id: impl Into<String>, content: impl Into<String>) -> Self {
        Self { tool_call_id: Some(call_id.into()), ..Self::plain(Role::Tool, content) }
    }

    /// Checks that tool fields only appear on the roles that may carry them.
    pub fn check_shape(&self) -> Result<(), String> {
        if !self.tool_calls.is_empty() && self.role != Role::Assistant {
            return Err(format!("{:?} message carries tool_calls", self.role));
        }
        match (self.role, &self.tool_call_id) {
            (Role::Tool, None) => Err("tool message without tool_call_id".into()),
            (r, Some(_)) if r != Role::Tool => Err(format!("{r:?} message carries tool_call_id")),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
    /// JSON schema of the arguments object.
    pub parameters: Value,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub tools: Vec<ToolSpec>,
    pub temperature: f32,
    pub max_tokens: Option<u32>,
}
