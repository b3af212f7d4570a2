//! Approximate k-NN over chunk embeddings with record-level access filtering.
//!
//! [`HnswIndex`] is the production structure; [`brute_force_knn`] scans every
//! live row and serves as the exact reference in tests and benchmarks. Both
//! share the result ordering: score descending, then chunk id ascending.

mod brute;
mod hnsw;
mod snapshot;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{ChunkId, RecordId};
use crate::scalar::Scalar;

pub use brute::brute_force_knn;
pub use hnsw::{HnswIndex, MemoryReport, StoredRow};

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("chunk id {0} already present")]
    DuplicateId(ChunkId),
    #[error("dimension mismatch: index has {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("vector has zero or non-finite norm")]
    InvalidVector,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("snapshot i/o failed: {0}")]
    IoFailure(#[from] std::io::Error),
    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HnswParams {
    /// Maximum neighbors per node on upper layers; layer 0 allows `2 * m`.
    pub m: usize,
    pub ef_construction: usize,
    pub ef_search: usize,
    /// Seed for level assignment.
    pub seed: u64,
}

impl Default for HnswParams {
    fn default() -> Self {
        Self { m: 16, ef_construction: 200, ef_search: 800, seed: 0x5eed_cafe }
    }
}

impl HnswParams {
    pub fn validate(&self) -> Result<(), IndexError> {
        if self.m < 2 {
            return Err(IndexError::InvalidParams(format!("m must be >= 2, got {}", self.m)));
        }
        if self.m > u16::MAX as usize / 2 {
            return Err(IndexError::InvalidParams(format!("m too large: {}", self.m)));
        }
        if self.ef_construction == 0 || self.ef_search == 0 {
            return Err(IndexError::InvalidParams("ef values must be positive".into()));
        }
        Ok(())
    }
}

/// One vector-table row: the six stored columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkRow<S> {
    pub id: ChunkId,
    pub record_id: RecordId,
    pub from_metadata: bool,
    pub file_name: Option<String>,
    pub embedding: Vec<S>,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor<S> {
    pub id: ChunkId,
    pub record_id: RecordId,
    pub score: S,
}

/// Total result order: higher score first, then lower chunk id.
pub(crate) fn neighbor_order<S: Scalar>(a: &Neighbor<S>, b: &Neighbor<S>) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then(a.id.cmp(&b.id))
}
