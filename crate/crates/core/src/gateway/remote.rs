//! HTTP clients for OpenAI-compatible model servers.
//!
//! `EMBED_URL` and `LLM_URL` are API base URLs (for example
//! `http://host:8000/v1`); `/embeddings` and `/chat/completions` are
//! appended. `RERANK_URL` is the full endpoint, called with
//! `{"model", "query", "documents"}` and expected to answer `{"scores"}`.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::*;
use crate::scalar::normalize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { attempts: 3, base_delay: Duration::from_millis(250) }
    }
}

impl RetryPolicy {
    /// Runs `op` until it succeeds, fails with a non-retryable error, or the
    /// attempts are used up. Delays double after each failure.
    pub fn run<T>(&self, mut op: impl FnMut() -> Result<T, GatewayError>) -> Result<T, GatewayError> {
        let mut delay = self.base_delay;
        let mut attempt = 1;
        loop {
            match op() {
                Err(e) if e.is_retryable() && attempt < self.attempts => {
                    tracing::warn!(attempt, error = %e, "upstream call failed, retrying");
                    std::thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayConfig {
    pub embed_url: Option<String>,
    pub rerank_url: Option<String>,
    pub llm_url: Option<String>,
    pub embed_model: String,
    pub rerank_model: String,
    pub llm_model: String,
    pub dimension: usize,
    pub timeout_secs: u64,
    pub max_batch: usize,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            embed_url: None,
            rerank_url: None,
            llm_url: None,
            embed_model: "Qwen3-Embedding-0.6B".into(),
            rerank_model: "Qwen3-Reranker-0.6B".into(),
            llm_model: "gpt-oss-120b".into(),
            dimension: 1024,
            timeout_secs: 60,
            max_batch: 32,
        }
    }
}

impl GatewayConfig {
    /// Overrides fields from `EMBED_URL`, `RERANK_URL`, `LLM_URL`,
    /// `EMBED_MODEL`, `RERANK_MODEL` and `LLM_MODEL` when set.
    pub fn apply_env(&mut self) {
        self.apply_vars(|k| std::env::var(k).ok());
    }

    pub fn apply_vars(&mut self, get: impl Fn(&str) -> Option<String>) {
        let set = |slot: &mut Option<String>, key| {
            if let Some(v) = get(key).filter(|v| !v.is_empty()) {
                *slot = Some(v);
            }
        };
        set(&mut self.embed_url, "EMBED_URL");
        set(&mut self.rerank_url, "RERANK_URL");
        set(&mut self.llm_url, "LLM_URL");
        for (slot, key) in [
            (&mut self.embed_model, "EMBED_MODEL"),
            (&mut self.rerank_model, "RERANK_MODEL"),
            (&mut self.llm_model, "LLM_MODEL"),
        ] {
            if let Some(v) = get(key).filter(|v| !v.is_empty()) {
                *slot = v;
            }
        }
    }

    fn agent(&self) -> ureq::Agent {
        ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(self.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into()
    }
}

fn post_json(agent: &ureq::Agent, url: &str, body: &Value) -> Result<Value, GatewayError> {
    let mut resp = agent.post(url).send_json(body).map_err(|e| GatewayError::UpstreamUnavailable(e.to_string()))?;
    let status = resp.status().as_u16();
    let text = resp
        .body_mut()
        .read_to_string()
        .map_err(|e| GatewayError::UpstreamUnavailable(e.to_string()))?;
    match status {
        200..=299 => serde_json::from_str(&text)
            .map_err(|e| GatewayError::UpstreamRejected { status: Some(status), reason: RejectReason::Status(format!("bad json: {e}")) }),
        429 | 500..=599 => Err(GatewayError::UpstreamUnavailable(format!("status {status}"))),
        400 | 413 if looks_like_overflow(&text) => Err(GatewayError::ContextOverflow(text)),
        _ => Err(GatewayError::UpstreamRejected { status: Some(status), reason: RejectReason::Status(text) }),
    }
}

fn looks_like_overflow(body: &str) -> bool {
    let b = body.to_lowercase();
    b.contains("context length") || b.contains("context window") || b.contains("maximum context")
}

fn bad_shape(what: &str) -> GatewayError {
    GatewayError::UpstreamRejected { status: Some(200), reason: RejectReason::Status(format!("unexpected response shape: {what}")) }
}

pub struct HttpEmbedder {
    agent: ureq::Agent,
    url: String,
    model: String,
    dimension: usize,
    max_batch: usize,
    pub retry: RetryPolicy,
}

impl HttpEmbedder {
    pub fn new(config: &GatewayConfig, base_url: &str) -> Self {
        Self {
            agent: config.agent(),
            url: format!("{}/embeddings", base_url.trim_end_matches('/')),
            model: config.embed_model.clone(),
            dimension: config.dimension,
            max_batch: config.max_batch.max(1),
            retry: RetryPolicy::default(),
        }
    }

    fn embed_chunk(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, GatewayError> {
        let body = json!({ "model": self.model, "input": texts });
        let resp = self.retry.run(|| post_json(&self.agent, &self.url, &body))?;
        let data = resp["data"].as_array().ok_or_else(|| bad_shape("missing data"))?;
        if data.len() != texts.len() {
            return Err(bad_shape("embedding count differs from input count"));
        }
        let mut out = vec![Vec::new(); texts.len()];
        for (pos, item) in data.iter().enumerate() {
            let idx = item["index"].as_u64().map_or(pos, |i| i as usize);
            let mut v: Vec<f32> = item["embedding"]
                .as_array()
                .ok_or_else(|| bad_shape("missing embedding"))?
                .iter()
                .map(|x| x.as_f64().map(|f| f as f32).ok_or_else(|| bad_shape("non-numeric embedding")))
                .collect::<Result<_, _>>()?;
            if v.len() != self.dimension {
                return Err(bad_shape(&format!("dimension {} instead of {}", v.len(), self.dimension)));
            }
            if !normalize(&mut v) {
                return Err(bad_shape("zero embedding"));
            }
            *out.get_mut(idx).ok_or_else(|| bad_shape("index out of range"))? = v;
        }
        Ok(out)
    }
}

impl Embedder for HttpEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, GatewayError> {
        if texts.iter().any(|t| t.is_empty()) {
            return Err(GatewayError::invalid("empty text in embedding batch"));
        }
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.max_batch) {
            out.extend(self.embed_chunk(chunk)?);
        }
        Ok(out)
    }
}

pub struct HttpReranker {
    agent: ureq::Agent,
    url: String,
    model: String,
    pub retry: RetryPolicy,
}

impl HttpReranker {
    pub fn new(config: &GatewayConfig, url: &str) -> Self {
        Self { agent: config.agent(), url: url.to_owned(), model: config.rerank_model.clone(), retry: RetryPolicy::default() }
    }
}

impl Reranker for HttpReranker {
    fn rerank(&self, req: &RerankRequest) -> Result<Vec<f32>, GatewayError> {
        if req.candidates.is_empty() {
            return Err(GatewayError::invalid("rerank request without candidates"));
        }
        let body = json!({ "model": self.model, "query": req.query, "documents": req.candidates });
        let resp = self.retry.run(|| post_json(&self.agent, &self.url, &body))?;
        let scores: Vec<f32> = resp["scores"]
            .as_array()
            .ok_or_else(|| bad_shape("missing scores"))?
            .iter()
            .map(|s| s.as_f64().map(|f| f as f32).filter(|f| f.is_finite()).ok_or_else(|| bad_shape("bad score")))
            .collect::<Result<_, _>>()?;
        if scores.len() != req.candidates.len() {
            return Err(bad_shape("score count differs from candidate count"));
        }
        Ok(scores.into_iter().map(|s| s.clamp(0.0, 1.0)).collect())
    }
}

pub struct HttpChat {
    agent: ureq::Agent,
    url: String,
    model: String,
    pub retry: RetryPolicy,
}

impl HttpChat {
    pub fn new(config: &GatewayConfig, base_url: &str) -> Self {
        Self {
            agent: config.agent(),
            url: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            model: config.llm_model.clone(),
            retry: RetryPolicy::default(),
        }
    }
}

fn wire_message(m: &ChatMessage) -> Value {
    let mut v = json!({ "role": m.role, "content": m.content });
    if !m.tool_calls.is_empty() {
        v["tool_calls"] = m
            .tool_calls
            .iter()
            .map(|c| json!({ "id": c.id, "type": "function", "function": { "name": c.name, "arguments": c.arguments.to_string() } }))
            .collect();
    }
    if let Some(id) = &m.tool_call_id {
        v["tool_call_id"] = json!(id);
    }
    v
}

pub(crate) fn wire_request(model: &str, req: &ChatRequest) -> Value {
    let mut body = json!({
        "model": model,
        "messages": req.messages.iter().map(wire_message).collect::<Vec<_>>(),
        "temperature": req.temperature,
    });
    if let Some(n) = req.max_tokens {
        body["max_tokens"] = json!(n);
    }
    if !req.tools.is_empty() {
        body["tools"] = req
            .tools
            .iter()
            .map(|t| json!({ "type": "function", "function": { "name": t.name, "description": t.description, "parameters": t.parameters } }))
            .collect();
    }
    body
}

pub(crate) fn parse_reply(resp: &Value) -> Result<ChatMessage, GatewayError> {
    let choice = &resp["choices"][0];
    if choice["finish_reason"] == "length" && choice["message"]["content"].as_str().unwrap_or("").is_empty() {
        return Err(GatewayError::ContextOverflow("model stopped at length limit".into()));
    }
    let msg = choice.get("message").ok_or_else(|| bad_shape("missing choices[0].message"))?;
    let mut calls = Vec::new();
    for (i, c) in msg["tool_calls"].as_array().into_iter().flatten().enumerate() {
        let name = c["function"]["name"].as_str().ok_or_else(|| bad_shape("tool call without name"))?;
        let arguments = match &c["function"]["arguments"] {
            Value::String(s) => serde_json::from_str(s).unwrap_or_else(|_| Value::String(s.clone())),
            other => other.clone(),
        };
        let id = c["id"].as_str().map_or_else(|| format!("call_{i}"), str::to_owned);
        calls.push(ToolCall { name: name.to_owned(), arguments, id });
    }
    let content = msg["content"].as_str().unwrap_or_default().to_owned();
    Ok(ChatMessage { role: Role::Assistant, content, tool_calls: calls, tool_call_id: None })
}

impl ChatModel for HttpChat {
    fn chat_complete(&self, req: &ChatRequest) -> Result<ChatMessage, GatewayError> {
        if req.messages.is_empty() {
            return Err(GatewayError::invalid("no messages"));
        }
        let body = wire_request(&self.model, req);
        let resp = self.retry.run(|| post_json(&self.agent, &self.url, &body))?;
        parse_reply(&resp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn retry_stops_after_three_attempts() {
        let policy = RetryPolicy { attempts: 3, base_delay: Duration::from_millis(1) };
        let mut calls = 0;
        let r: Result<(), _> = policy.run(|| {
            calls += 1;
            Err(GatewayError::UpstreamUnavailable("down".into()))
        });
        assert!(r.is_err());
        assert_eq!(calls, 3);
    }

    #[test]
    fn rejection_is_not_retried() {
        let policy = RetryPolicy { attempts: 3, base_delay: Duration::from_millis(1) };
        let mut calls = 0;
        let _: Result<(), _> = policy.run(|| {
            calls += 1;
            Err(GatewayError::invalid("nope"))
        });
        assert_eq!(calls, 1);
    }

    #[test]
    fn env_overrides() {
        let mut c = GatewayConfig::default();
        c.apply_vars(|k| (k == "LLM_MODEL" || k == "EMBED_URL").then(|| format!("v-{k}")));
        assert_eq!(c.llm_model, "v-LLM_MODEL");
        assert_eq!(c.embed_url.as_deref(), Some("v-EMBED_URL"));
        assert_eq!(c.embed_model, "Qwen3-Embedding-0.6B");
    }

    #[test]
    fn tool_call_arguments_decoded_from_string() {
        let resp = json!({"choices":[{"message":{"content":null,"tool_calls":[
            {"id":"c1","type":"function","function":{"name":"Kadi_Similarity_Search","arguments":"{\"text\":\"q\"}"}}]}}]});
        let m = parse_reply(&resp).unwrap();
        assert_eq!(m.tool_calls[0].arguments, json!({"text":"q"}));
        assert_eq!(m.tool_calls[0].id, "c1");
    }
}
