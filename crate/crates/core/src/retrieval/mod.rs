//! Semantic search over the vector table and the background work that keeps
//! the table in step with the repository.

pub mod events;
mod queue;
mod search;
mod sync;
mod table;

pub use events::{CollectingSink, NullSink, SyncEvent, SyncKind, SyncSink, SyncSubject};
pub use queue::{FailedEvent, QueueConfig, SyncQueue, SyncStatus, SyncWorkers};
pub use search::{Retriever, ScoredChunk, SearchError, SearchParams, SearchResponse};
pub use sync::{rebuild_from_repository, SyncEngine, SyncError, SyncOutcome};
pub use table::{TableEntry, VectorTable};
