use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::atomic::{AtomicU64, Ordering};

use parking_lot::RwLock;

use super::events::SyncSubject;
use crate::chunking::TextChunk;
use crate::ids::{ChunkId, RecordId};
use crate::index::{ChunkRow, HnswParams, IndexError, MemoryReport, Neighbor, StoredRow};
use crate::VectorIndex;

/// One logical row as seen by equivalence checks: ordinals are the rank of
/// a chunk id among the rows of the same (record, subject).
pub type TableEntry = (RecordId, SyncSubject, u32, String);

/// The vector table: chunk rows with their embeddings in an HNSW index.
/// Single writer, many readers.
pub struct VectorTable {
    index: RwLock<VectorIndex>,
    next_id: AtomicU64,
}

impl std::fmt::Debug for VectorTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VectorTable").field("rows", &self.len()).finish()
    }
}

fn subject_of(row: &StoredRow) -> SyncSubject {
    SyncSubject::from_row(row.from_metadata, row.file_name.as_deref())
}

impl VectorTable {
    pub fn new(dim: usize, params: HnswParams) -> Result<Self, IndexError> {
        Ok(Self::from_index(VectorIndex::new(dim, params)?))
    }

    pub fn from_index(index: VectorIndex) -> Self {
        let next = index.rows().map(|r| r.id.0 + 1).max().unwrap_or(1);
        Self { index: RwLock::new(index), next_id: AtomicU64::new(next) }
    }

    pub fn dim(&self) -> usize {
        self.index.read().dim()
    }

    pub fn len(&self) -> usize {
        self.index.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn memory_report(&self) -> MemoryReport {
        self.index.read().memory_report()
    }

    /// Runs `f` with shared access to the index.
    pub fn with_index<T>(&self, f: impl FnOnce(&VectorIndex) -> T) -> T {
        f(&self.index.read())
    }

    /// Replaces all rows of `(record, subject)` with `chunks` in one write.
    /// Returns (written, deleted).
    pub fn replace_subject(
        &self,
        record: RecordId,
        subject: &SyncSubject,
        chunks: Vec<(TextChunk, Vec<f32>)>,
    ) -> Result<(usize, usize), IndexError> {
        let mut index = self.index.write();
        for (_, e) in &chunks {
            if e.len() != index.dim() {
                return Err(IndexError::DimensionMismatch { expected: index.dim(), actual: e.len() });
            }
        }
        let deleted = index.delete_where(|r| r.record_id == record && subject_of(r) == *subject);
        let written = chunks.len();
        for (chunk, embedding) in chunks {
            let id = ChunkId(self.next_id.fetch_add(1, Ordering::Relaxed));
            index.insert(ChunkRow {
                id,
                record_id: record,
                from_metadata: chunk.from_metadata,
                file_name: chunk.file_name,
                embedding,
                text: chunk.text,
            })?;
        }
        Ok((written, deleted))
    }

    pub fn delete_subject(&self, record: RecordId, subject: &SyncSubject) -> usize {
        self.index.write().delete_where(|r| r.record_id == record && subject_of(r) == *subject)
    }

    pub fn delete_record(&self, record: RecordId) -> usize {
        self.index.write().delete_by_record(record)
    }

    pub fn count_subject(&self, record: RecordId, subject: &SyncSubject) -> usize {
        self.index.read().rows().filter(|r| r.record_id == record && subject_of(r) == *subject).count()
    }

    /// Filtered k-NN returning the stored rows alongside the neighbors.
    pub fn search(
        &self,
        query: &[f32],
        k: usize,
        allowed: &HashSet<RecordId>,
    ) -> Result<Vec<(Neighbor<f32>, StoredRow)>, IndexError> {
        let index = self.index.read();
        let hits = index.knn_filtered(query, k, allowed)?;
        Ok(hits
            .into_iter()
            .filter_map(|n| index.get(n.id).cloned().map(|row| (n, row)))
            .collect())
    }

    /// Every live row as (record, subject, ordinal, text).
    pub fn entries(&self) -> BTreeSet<TableEntry> {
        let index = self.index.read();
        let mut groups: BTreeMap<(RecordId, SyncSubject), Vec<(ChunkId, String)>> = BTreeMap::new();
        for r in index.rows() {
            groups.entry((r.record_id, subject_of(r))).or_default().push((r.id, r.text.clone()));
        }
        let mut out = BTreeSet::new();
        for ((record, subject), mut rows) in groups {
            rows.sort_by_key(|(id, _)| *id);
            for (ordinal, (_, text)) in rows.into_iter().enumerate() {
                out.insert((record, subject.clone(), ordinal as u32, text));
            }
        }
        out
    }

    pub fn snapshot(&self, path: impl AsRef<std::path::Path>) -> Result<(), IndexError> {
        self.index.read().snapshot(path)
    }
}
