//! Permission-aware retrieval for a research data repository.
//!
//! The [`repository`] holds records under per-user grants. Changes flow as
//! events into [`retrieval`], which chunks, embeds and indexes them in an
//! HNSW graph ([`index`]). Searches are filtered to the caller's readable
//! records, reranked, and exposed to a tool-using [`agent`].

pub mod agent;
pub mod chunking;
pub mod fixtures;
pub mod gateway;
pub mod ids;
pub mod index;
pub mod repository;
pub mod retrieval;
pub mod scalar;

pub use ids::{ChunkId, CollectionId, RecordId, UserId};
pub use scalar::Scalar;

/// Index over 32-bit embeddings, as stored by the vector table.
pub type VectorIndex = index::HnswIndex<f32>;
pub type VectorIndexF64 = index::HnswIndex<f64>;
