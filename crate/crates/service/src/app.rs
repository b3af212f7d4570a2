use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use aclrag::agent::{Agent, ToolContext};
use aclrag::gateway::{
    ChatModel, Embedder, HashingEmbedder, HttpChat, HttpEmbedder, HttpReranker, JaccardReranker, Reranker,
    Unavailable,
};
use aclrag::repository::{load_fixture, ImportSummary, RepoError, Repository};
use aclrag::retrieval::{Retriever, SyncEngine, SyncQueue, SyncWorkers, VectorTable};
use thiserror::Error;

use crate::config::ServiceConfig;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error(transparent)]
    Repository(#[from] RepoError),
    #[error(transparent)]
    Index(#[from] aclrag::index::IndexError),
    #[error("embedder dimension {embedder} differs from configured {configured}")]
    Dimension { embedder: usize, configured: usize },
}

/// The three model backends.
#[derive(Clone)]
pub struct Models {
    pub embedder: Arc<dyn Embedder>,
    pub reranker: Arc<dyn Reranker>,
    pub chat: Arc<dyn ChatModel>,
}

impl Models {
    /// HTTP clients for every configured endpoint. Without an embedding
    /// endpoint a hashing embedder is used, without a reranker endpoint a
    /// token-overlap reranker, and without a chat endpoint chat requests fail
    /// as unavailable.
    pub fn from_config(cfg: &ServiceConfig) -> Self {
        let g = &cfg.gateway;
        let embedder: Arc<dyn Embedder> = match &g.embed_url {
            Some(url) => Arc::new(HttpEmbedder::new(g, url)),
            None => Arc::new(HashingEmbedder::new(g.dimension, 0)),
        };
        let reranker: Arc<dyn Reranker> = match &g.rerank_url {
            Some(url) => Arc::new(HttpReranker::new(g, url)),
            None => Arc::new(JaccardReranker),
        };
        let chat: Arc<dyn ChatModel> = match &g.llm_url {
            Some(url) => Arc::new(HttpChat::new(g, url)),
            None => Arc::new(Unavailable { dimension: g.dimension }),
        };
        Self { embedder, reranker, chat }
    }
}

/// Shared handles used by the request handlers.
#[derive(Clone)]
pub struct AppState {
    pub config: Arc<ServiceConfig>,
    pub repo: Arc<Repository>,
    pub table: Arc<VectorTable>,
    pub retriever: Retriever,
    pub agent: Arc<Agent>,
    pub queue: Arc<SyncQueue>,
}

/// Repository, vector table, sync workers and agent wired together.
pub struct Service {
    pub state: AppState,
    workers: Option<SyncWorkers>,
}

impl Service {
    /// Builds the stack, registers the configured users, starts the sync
    /// workers and imports the configured fixture. Indexing of the fixture
    /// continues in the background.
    pub fn new(config: ServiceConfig, models: Models) -> Result<Self, ServiceError> {
        config.validate()?;
        let dim = models.embedder.dimension();
        if dim != config.gateway.dimension {
            return Err(ServiceError::Dimension { embedder: dim, configured: config.gateway.dimension });
        }
        let repo = Arc::new(Repository::default());
        for u in &config.users {
            let name = if u.display_name.is_empty() { &u.user_id } else { &u.display_name };
            repo.add_user(u.user_id.as_str(), name.as_str(), u.token.as_str())?;
        }
        let table = Arc::new(VectorTable::new(dim, config.hnsw)?);
        let engine = SyncEngine {
            repo: repo.clone(),
            table: table.clone(),
            embedder: models.embedder.clone(),
            chunking: config.chunking,
        };
        let queue = Arc::new(SyncQueue::new(engine, config.sync));
        repo.set_sink(queue.clone());
        let workers = SyncWorkers::start(queue.clone());

        let retriever = Retriever {
            repo: repo.clone(),
            table: table.clone(),
            embedder: models.embedder.clone(),
            reranker: models.reranker.clone(),
        };
        let mut tools = ToolContext::new(retriever.clone());
        tools.search_k = config.search.k;
        tools.search_n = config.search.n;
        tools.output_char_limit = config.search.tool_output_chars;
        let agent = Arc::new(Agent::new(tools, models.chat.clone(), config.agent));

        let fixture = config.fixture.clone();
        let service = Self {
            state: AppState { config: Arc::new(config), repo, table, retriever, agent, queue },
            workers: Some(workers),
        };
        if let Some(path) = fixture {
            let summary = service.load_fixture(&path)?;
            tracing::info!(records = summary.records, files = summary.files, path = %path.display(), "fixture imported");
        }
        Ok(service)
    }

    pub fn router(&self) -> axum::Router {
        crate::routes::router(self.state.clone())
    }

    /// Imports an NDJSON fixture; its records are indexed by the workers.
    pub fn load_fixture(&self, path: impl AsRef<Path>) -> Result<ImportSummary, ServiceError> {
        Ok(load_fixture(&self.state.repo, path)?)
    }

    /// Blocks until the sync queue is empty or `timeout` passes.
    pub fn wait_synced(&self, timeout: Duration) -> bool {
        self.state.queue.wait_idle(timeout)
    }

    /// Drains the sync queue for at most `drain`, then stops the workers.
    /// Returns whether the queue was empty at the end.
    pub fn shutdown(mut self, drain: Duration) -> bool {
        self.workers.take().map_or(true, |w| w.shutdown(Some(drain)))
    }
}

/// Serves `service` until `signal` resolves, then drains the sync queue.
pub async fn serve(
    service: Service,
    listener: tokio::net::TcpListener,
    signal: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<bool> {
    let drain = Duration::from_secs(service.state.config.drain_timeout_secs);
    axum::serve(listener, service.router()).with_graceful_shutdown(signal).await?;
    tracing::info!("http server stopped, draining sync queue");
    let drained = tokio::task::spawn_blocking(move || service.shutdown(drain)).await.unwrap_or(false);
    if !drained {
        tracing::warn!("sync queue not drained before timeout");
    }
    Ok(drained)
}
