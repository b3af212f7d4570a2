use std::cmp::Ordering;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::table::VectorTable;
use crate::gateway::{Embedder, GatewayError, RerankRequest, Reranker};
use crate::ids::{ChunkId, RecordId, UserId};
use crate::index::IndexError;
use crate::repository::{RepoError, Repository};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchParams {
    pub query: String,
    /// First-stage neighbor count.
    pub k: usize,
    /// Final result count after reranking.
    pub n: usize,
}

impl SearchParams {
    pub fn new(query: impl Into<String>) -> Self {
        Self { query: query.into(), k: 50, n: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredChunk {
    pub id: ChunkId,
    pub record_id: RecordId,
    pub from_metadata: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file_name: Option<String>,
    pub text: String,
    pub first_stage_score: f32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rerank_score: Option<f32>,
}

impl ScoredChunk {
    /// "metadata" or the file name.
    pub fn specifier(&self) -> &str {
        self.file_name.as_deref().unwrap_or("metadata")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub results: Vec<ScoredChunk>,
    /// True when the reranker failed and results keep first-stage order.
    pub degraded: bool,
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("query is empty")]
    EmptyQuery,
    #[error("need 1 <= n <= k, got n={n}, k={k}")]
    InvalidParams { k: usize, n: usize },
    #[error(transparent)]
    Repository(#[from] RepoError),
    #[error("embedder unavailable: {0}")]
    EmbedderUnavailable(GatewayError),
    #[error(transparent)]
    Index(#[from] IndexError),
}

/// The embed, filtered k-NN, rerank pipeline.
#[derive(Clone)]
pub struct Retriever {
    pub repo: Arc<Repository>,
    pub table: Arc<VectorTable>,
    pub embedder: Arc<dyn Embedder>,
    pub reranker: Arc<dyn Reranker>,
}

fn by_first_stage(a: &ScoredChunk, b: &ScoredChunk) -> Ordering {
    b.first_stage_score
        .partial_cmp(&a.first_stage_score)
        .unwrap_or(Ordering::Equal)
        .then(a.id.cmp(&b.id))
}

impl Retriever {
    pub fn semantic_search(&self, params: &SearchParams, user: &UserId) -> Result<SearchResponse, SearchError> {
        if params.query.trim().is_empty() {
            return Err(SearchError::EmptyQuery);
        }
        if params.n == 0 || params.n > params.k {
            return Err(SearchError::InvalidParams { k: params.k, n: params.n });
        }
        let allowed = self.repo.accessible_record_ids(user)?;
        if allowed.is_empty() {
            return Ok(SearchResponse { results: Vec::new(), degraded: false });
        }
        let query = self.embedder.embed(&params.query).map_err(SearchError::EmbedderUnavailable)?;
        let mut results: Vec<ScoredChunk> = self
            .table
            .search(&query, params.k, &allowed)?
            .into_iter()
            .map(|(n, row)| ScoredChunk {
                id: row.id,
                record_id: row.record_id,
                from_metadata: row.from_metadata,
                file_name: row.file_name,
                text: row.text,
                first_stage_score: n.score,
                rerank_score: None,
            })
            .collect();
        if results.is_empty() {
            return Ok(SearchResponse { results, degraded: false });
        }

        let req = RerankRequest {
            query: params.query.clone(),
            candidates: results.iter().map(|r| r.text.clone()).collect(),
        };
        let degraded = match self.reranker.rerank(&req) {
            Ok(scores) if scores.len() == results.len() => {
                for (r, s) in results.iter_mut().zip(scores) {
                    r.rerank_score = Some(s);
                }
                results.sort_by(|a, b| {
                    b.rerank_score
                        .partial_cmp(&a.rerank_score)
                        .unwrap_or(Ordering::Equal)
                        .then_with(|| by_first_stage(a, b))
                });
                false
            }
            Ok(_) | Err(_) => {
                tracing::warn!("reranker failed; returning first-stage order");
                results.sort_by(by_first_stage);
                true
            }
        };
        results.truncate(params.n);
        Ok(SearchResponse { results, degraded })
    }
}
