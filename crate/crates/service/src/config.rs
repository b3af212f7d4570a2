//! Service configuration: a TOML file with environment overrides.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use aclrag::agent::AgentConfig;
use aclrag::chunking::ChunkConfig;
use aclrag::gateway::GatewayConfig;
use aclrag::index::HnswParams;
use aclrag::retrieval::QueueConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("environment variable {key}: {message}")]
    Env { key: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

/// A user and the static bearer token that authenticates them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserEntry {
    pub user_id: String,
    #[serde(default)]
    pub display_name: String,
    pub token: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchDefaults {
    pub k: usize,
    pub n: usize,
    /// Character cap on each tool result shown to the model.
    pub tool_output_chars: usize,
}

impl Default for SearchDefaults {
    fn default() -> Self {
        Self { k: 50, n: 8, tool_output_chars: 6000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub bind: String,
    /// Base URL of the repository shown to the model in its prompt.
    pub instance_url: String,
    /// NDJSON fixture imported at startup.
    pub fixture: Option<PathBuf>,
    pub users: Vec<UserEntry>,
    /// TOML file with further `[[users]]` entries.
    pub token_file: Option<PathBuf>,
    /// Upper bound on waiting for the sync queue at shutdown.
    pub drain_timeout_secs: u64,
    pub gateway: GatewayConfig,
    pub hnsw: HnswParams,
    pub chunking: ChunkConfig,
    pub search: SearchDefaults,
    pub agent: AgentConfig,
    pub sync: QueueConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".into(),
            instance_url: "http://127.0.0.1:8080".into(),
            fixture: None,
            users: Vec::new(),
            token_file: None,
            drain_timeout_secs: 30,
            gateway: GatewayConfig::default(),
            hnsw: HnswParams::default(),
            chunking: ChunkConfig::default(),
            search: SearchDefaults::default(),
            agent: AgentConfig::default(),
            sync: QueueConfig::default(),
        }
    }
}

#[derive(Deserialize)]
struct TokenFile {
    #[serde(default)]
    users: Vec<UserEntry>,
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_owned(), source })
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Reads `path` (or starts from defaults), applies the process
    /// environment, merges the token file and validates.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => Self::from_toml(&read(p)?)
                .map_err(|e| ConfigError::Parse { path: p.to_owned(), message: e.to_string() })?,
            None => Self::default(),
        };
        cfg.apply_vars(|k| std::env::var(k).ok())?;
        cfg.merge_token_file()?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Overrides from `ACLRAG_BIND`, `ACLRAG_INSTANCE_URL`, `ACLRAG_FIXTURE`,
    /// `ACLRAG_TOKEN_FILE`, `ACLRAG_MAX_TOOL_CALLS`, `ACLRAG_WORKERS`, and the
    /// model endpoint variables read by [`GatewayConfig::apply_vars`].
    pub fn apply_vars(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        let get = |k: &str| get(k).filter(|v| !v.is_empty());
        if let Some(v) = get("ACLRAG_BIND") {
            self.bind = v;
        }
        if let Some(v) = get("ACLRAG_INSTANCE_URL") {
            self.instance_url = v;
        }
        if let Some(v) = get("ACLRAG_FIXTURE") {
            self.fixture = Some(v.into());
        }
        if let Some(v) = get("ACLRAG_TOKEN_FILE") {
            self.token_file = Some(v.into());
        }
        let number = |key: &str| -> Result<Option<usize>, ConfigError> {
            get(key)
                .map(|v| v.parse().map_err(|_| ConfigError::Env { key: key.into(), message: format!("{v:?} is not a count") }))
                .transpose()
        };
        if let Some(n) = number("ACLRAG_MAX_TOOL_CALLS")? {
            self.agent.max_tool_calls = n;
        }
        if let Some(n) = number("ACLRAG_WORKERS")? {
            self.sync.workers = n;
        }
        self.gateway.apply_vars(get);
        Ok(())
    }

    pub fn merge_token_file(&mut self) -> Result<(), ConfigError> {
        let Some(path) = self.token_file.clone() else {
            return Ok(());
        };
        let file: TokenFile = toml::from_str(&read(&path)?)
            .map_err(|e| ConfigError::Parse { path: path.clone(), message: e.to_string() })?;
        self.users.extend(file.users);
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        let s = &self.search;
        if !(1..=1000).contains(&s.k) {
            return bad(format!("search.k must be in 1..=1000, got {}", s.k));
        }
        if s.n == 0 || s.n > s.k {
            return bad(format!("search.n must be in 1..=k ({}), got {}", s.k, s.n));
        }
        if s.tool_output_chars < 200 {
            return bad(format!("search.tool_output_chars must be at least 200, got {}", s.tool_output_chars));
        }
        if !(1..=20).contains(&self.agent.max_tool_calls) {
            return bad(format!("agent.max_tool_calls must be in 1..=20, got {}", self.agent.max_tool_calls));
        }
        if self.agent.json_retry_limit > 10 {
            return bad(format!("agent.json_retry_limit must be at most 10, got {}", self.agent.json_retry_limit));
        }
        if !(1..=64).contains(&self.sync.workers) {
            return bad(format!("sync.workers must be in 1..=64, got {}", self.sync.workers));
        }
        let c = &self.chunking;
        if c.max_chunk_chars == 0 || c.overlap_chars >= c.max_chunk_chars || c.json_max_chunk_chars == 0 {
            return bad("chunking limits need 0 <= overlap < max and positive maxima".into());
        }
        if self.gateway.dimension == 0 || self.gateway.max_batch == 0 {
            return bad("gateway.dimension and gateway.max_batch must be positive".into());
        }
        self.hnsw.validate().map_err(|e| ConfigError::Invalid(format!("hnsw: {e}")))?;
        let mut ids = HashSet::new();
        let mut tokens = HashSet::new();
        for u in &self.users {
            if u.user_id.is_empty() || u.token.is_empty() {
                return bad("users need a non-empty user_id and token".into());
            }
            if !ids.insert(&u.user_id) {
                return bad(format!("user {} listed twice", u.user_id));
            }
            if !tokens.insert(&u.token) {
                return bad(format!("token of user {} is already assigned", u.user_id));
            }
        }
        Ok(())
    }
}
