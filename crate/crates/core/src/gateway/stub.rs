//! Deterministic in-process model stand-ins.

use std::collections::{HashSet, VecDeque};
use std::hash::Hasher;

use fnv::FnvHasher;
use parking_lot::Mutex;

use super::*;
use crate::scalar::normalize;

/// Lowercased alphanumeric word tokens.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase)
}

/// Signed feature hashing of word tokens, L2-normalized.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dimension: usize,
    seed: u64,
}

impl HashingEmbedder {
    pub fn new(dimension: usize, seed: u64) -> Self {
        assert!(dimension > 0, "dimension must be positive");
        Self { dimension, seed }
    }

    fn hash(&self, token: &str) -> u64 {
        let mut h = FnvHasher::with_key(0xcbf2_9ce4_8422_2325 ^ self.seed);
        h.write(token.as_bytes());
        h.finish()
    }

    pub fn embed_one(&self, text: &str) -> Vec<f32> {
        let mut v = vec![0.0f32; self.dimension];
        let mut add = |token: &str| {
            let h = self.hash(token);
            let slot = (h % self.dimension as u64) as usize;
            v[slot] += if h >> 63 == 0 { 1.0 } else { -1.0 };
        };
        let mut any = false;
        for t in tokenize(text) {
            add(&t);
            any = true;
        }
        if !any {
            add(text);
        }
        if !normalize(&mut v) {
            // Every token cancelled out; fall back to the raw text.
            v.iter_mut().for_each(|x| *x = 0.0);
            let h = self.hash(text);
            v[(h % self.dimension as u64) as usize] = 1.0;
        }
        v
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self::new(1024, 0)
    }
}

impl Embedder for HashingEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, GatewayError> {
        if texts.iter().any(|t| t.is_empty()) {
            return Err(GatewayError::invalid("empty text in embedding batch"));
        }
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

/// Jaccard similarity of query and candidate token sets.
#[derive(Debug, Clone, Copy, Default)]
pub struct JaccardReranker;

impl JaccardReranker {
    pub fn score(query: &str, candidate: &str) -> f32 {
        let q: HashSet<String> = tokenize(query).collect();
        let c: HashSet<String> = tokenize(candidate).collect();
        let union = q.union(&c).count();
        if union == 0 {
            return if query == candidate { 1.0 } else { 0.0 };
        }
        q.intersection(&c).count() as f32 / union as f32
    }
}

impl Reranker for JaccardReranker {
    fn rerank(&self, req: &RerankRequest) -> Result<Vec<f32>, GatewayError> {
        if req.candidates.is_empty() {
            return Err(GatewayError::invalid("rerank request without candidates"));
        }
        Ok(req.candidates.iter().map(|c| Self::score(&req.query, c)).collect())
    }
}

/// Model that is always down.
#[derive(Debug, Clone, Copy, Default)]
pub struct Unavailable {
    pub dimension: usize,
}

impl Embedder for Unavailable {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_batch(&self, _texts: &[String]) -> Result<Vec<Vec<f32>>, GatewayError> {
        Err(GatewayError::UpstreamUnavailable("embedder disabled".into()))
    }
}

impl Reranker for Unavailable {
    fn rerank(&self, _req: &RerankRequest) -> Result<Vec<f32>, GatewayError> {
        Err(GatewayError::UpstreamUnavailable("reranker disabled".into()))
    }
}

impl ChatModel for Unavailable {
    fn chat_complete(&self, _req: &ChatRequest) -> Result<ChatMessage, GatewayError> {
        Err(GatewayError::UpstreamUnavailable("chat model disabled".into()))
    }
}

/// Replays a fixed list of assistant turns and records every request.
#[derive(Debug, Default)]
pub struct ScriptedChat {
    turns: Mutex<VecDeque<ChatMessage>>,
    requests: Mutex<Vec<ChatRequest>>,
}

impl ScriptedChat {
    pub fn new(turns: impl IntoIterator<Item = ChatMessage>) -> Self {
        Self { turns: Mutex::new(turns.into_iter().collect()), requests: Mutex::new(Vec::new()) }
    }

    pub fn requests(&self) -> Vec<ChatRequest> {
        self.requests.lock().clone()
    }

    pub fn remaining(&self) -> usize {
        self.turns.lock().len()
    }
}

impl ChatModel for ScriptedChat {
    fn chat_complete(&self, req: &ChatRequest) -> Result<ChatMessage, GatewayError> {
        if req.messages.is_empty() {
            return Err(GatewayError::invalid("no messages"));
        }
        self.requests.lock().push(req.clone());
        self.turns
            .lock()
            .pop_front()
            .ok_or(GatewayError::UpstreamRejected { status: None, reason: RejectReason::ScriptExhausted })
    }
}

type Responder = dyn Fn(&ChatRequest) -> Result<ChatMessage, GatewayError> + Send + Sync;

/// Chat stub whose reply is computed from the request.
pub struct AdaptiveChat {
    respond: Box<Responder>,
    requests: Mutex<Vec<ChatRequest>>,
}

impl AdaptiveChat {
    pub fn new(respond: impl Fn(&ChatRequest) -> Result<ChatMessage, GatewayError> + Send + Sync + 'static) -> Self {
        Self { respond: Box::new(respond), requests: Mutex::new(Vec::new()) }
    }

    pub fn requests(&self) -> Vec<ChatRequest> {
        self.requests.lock().clone()
    }
}

impl ChatModel for AdaptiveChat {
    fn chat_complete(&self, req: &ChatRequest) -> Result<ChatMessage, GatewayError> {
        if req.messages.is_empty() {
            return Err(GatewayError::invalid("no messages"));
        }
        self.requests.lock().push(req.clone());
        (self.respond)(req)
    }
}
