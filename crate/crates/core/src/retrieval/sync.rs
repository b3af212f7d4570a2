use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use super::events::{SyncEvent, SyncKind, SyncSubject};
use super::table::VectorTable;
use crate::chunking::{chunk_document, ChunkConfig, ChunkError, RawDocument, TextChunk};
use crate::gateway::{Embedder, GatewayError};
use crate::ids::RecordId;
use crate::index::{HnswParams, IndexError};
use crate::repository::Repository;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SyncOutcome {
    pub chunks_written: usize,
    pub chunks_deleted: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped_reason: Option<String>,
}

#[derive(Debug, Error, Clone)]
pub enum SyncError {
    #[error("embedder unavailable: {0}")]
    EmbedderUnavailable(GatewayError),
    #[error("extraction failed: {0}")]
    ExtractionFailed(String),
    #[error("index error: {0}")]
    Index(String),
}

impl SyncError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, SyncError::EmbedderUnavailable(_))
    }
}

impl From<IndexError> for SyncError {
    fn from(e: IndexError) -> Self {
        SyncError::Index(e.to_string())
    }
}

/// Applies sync events to the vector table.
///
/// Events are hints: the engine always reads the current repository state
/// for the event's (record, subject), so replaying stale or duplicate events
/// converges on the same table.
pub struct SyncEngine {
    pub repo: Arc<Repository>,
    pub table: Arc<VectorTable>,
    pub embedder: Arc<dyn Embedder>,
    pub chunking: ChunkConfig,
}

enum Extracted {
    Gone,
    Skipped(String),
    Failed(String),
    Chunks(Vec<TextChunk>),
}

fn extract(repo: &Repository, record: RecordId, subject: &SyncSubject, config: &ChunkConfig) -> Extracted {
    let doc = match subject {
        SyncSubject::Metadata => match repo.metadata_for_sync(record) {
            Some(text) => RawDocument::metadata(record, text),
            None => return Extracted::Gone,
        },
        SyncSubject::File(name) => {
            let Some(file) = repo.file_for_sync(record, name) else {
                return Extracted::Gone;
            };
            if !file.media_kind.is_supported() {
                return Extracted::Skipped(format!("unsupported media kind for {name}"));
            }
            match String::from_utf8(file.content) {
                Ok(text) => RawDocument { record_id: record, source: subject.clone(), media_kind: file.media_kind, text },
                Err(_) => return Extracted::Failed(format!("{name} is not valid UTF-8")),
            }
        }
    };
    match chunk_document(&doc, config) {
        Ok(chunks) => Extracted::Chunks(chunks),
        Err(ChunkError::UnsupportedMediaKind(k)) => Extracted::Skipped(format!("unsupported media kind {}", k.as_str())),
        Err(e) => Extracted::Failed(e.to_string()),
    }
}

fn embed_chunks(embedder: &dyn Embedder, chunks: Vec<TextChunk>) -> Result<Vec<(TextChunk, Vec<f32>)>, SyncError> {
    if chunks.is_empty() {
        return Ok(Vec::new());
    }
    let texts: Vec<String> = chunks.iter().map(|c| c.text.clone()).collect();
    let vectors = embedder.embed_batch(&texts).map_err(SyncError::EmbedderUnavailable)?;
    if vectors.len() != chunks.len() {
        return Err(SyncError::EmbedderUnavailable(GatewayError::UpstreamUnavailable(
            "embedding count differs from chunk count".into(),
        )));
    }
    Ok(chunks.into_iter().zip(vectors).collect())
}

impl SyncEngine {
    pub fn process_sync_event(&self, evt: &SyncEvent) -> Result<SyncOutcome, SyncError> {
        let record = evt.record_id;
        let subject = &evt.subject;
        if evt.kind == SyncKind::Deleted {
            let chunks_deleted = match subject {
                SyncSubject::Metadata => self.table.delete_record(record),
                SyncSubject::File(_) => self.table.delete_subject(record, subject),
            };
            return Ok(SyncOutcome { chunks_deleted, ..Default::default() });
        }
        match extract(&self.repo, record, subject, &self.chunking) {
            Extracted::Gone => {
                // The record or file vanished after the event; a deletion
                // event follows, but stale rows can go now.
                let chunks_deleted = match subject {
                    SyncSubject::Metadata => self.table.delete_record(record),
                    SyncSubject::File(_) => self.table.delete_subject(record, subject),
                };
                Ok(SyncOutcome { chunks_deleted, skipped_reason: Some("source no longer exists".into()), ..Default::default() })
            }
            Extracted::Skipped(reason) => {
                let chunks_deleted = self.table.delete_subject(record, subject);
                Ok(SyncOutcome { chunks_deleted, skipped_reason: Some(reason), ..Default::default() })
            }
            Extracted::Failed(reason) => {
                self.table.delete_subject(record, subject);
                Err(SyncError::ExtractionFailed(reason))
            }
            Extracted::Chunks(chunks) => {
                let rows = embed_chunks(self.embedder.as_ref(), chunks)?;
                let (chunks_written, chunks_deleted) = self.table.replace_subject(record, subject, rows)?;
                Ok(SyncOutcome { chunks_written, chunks_deleted, skipped_reason: None })
            }
        }
    }
}

/// Builds a fresh table from the current repository state: metadata plus
/// every supported file of every record. Files that fail extraction are
/// left out.
pub fn rebuild_from_repository(
    repo: &Repository,
    embedder: &dyn Embedder,
    params: HnswParams,
    config: &ChunkConfig,
) -> Result<VectorTable, SyncError> {
    let table = VectorTable::new(embedder.dimension(), params)?;
    for (record, files) in repo.all_subjects() {
        let subjects = std::iter::once(SyncSubject::Metadata).chain(files.into_iter().map(SyncSubject::File));
        for subject in subjects {
            if let Extracted::Chunks(chunks) = extract(repo, record, &subject, config) {
                let rows = embed_chunks(embedder, chunks)?;
                table.replace_subject(record, &subject, rows)?;
            }
        }
    }
    Ok(table)
}
