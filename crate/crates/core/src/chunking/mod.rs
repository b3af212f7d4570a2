//! Splitting extracted text into bounded chunks.
//!
//! Lengths are counted in Unicode scalar values, not bytes.

mod json;
mod text;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::RecordId;
use crate::repository::MediaKind;
use crate::retrieval::events::SyncSubject;

pub use json::{leaf_paths, split_json, PathStep};
pub use text::{split_code, split_plain};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChunkError {
    #[error("malformed json: {0}")]
    MalformedJson(String),
    #[error("media kind {0:?} cannot be chunked")]
    UnsupportedMediaKind(MediaKind),
    #[error("max_chunk_chars ({max}) must exceed overlap_chars ({overlap})")]
    InvalidLimits { max: usize, overlap: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChunkConfig {
    pub max_chunk_chars: usize,
    pub overlap_chars: usize,
    pub json_max_chunk_chars: usize,
}

impl Default for ChunkConfig {
    fn default() -> Self {
        Self { max_chunk_chars: 1500, overlap_chars: 150, json_max_chunk_chars: 1500 }
    }
}

/// Text extracted from a record's metadata or one of its files.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDocument {
    pub record_id: RecordId,
    pub source: SyncSubject,
    pub media_kind: MediaKind,
    pub text: String,
}

impl RawDocument {
    /// The canonical metadata document is always chunked as JSON.
    pub fn metadata(record_id: RecordId, text: String) -> Self {
        Self { record_id, source: SyncSubject::Metadata, media_kind: MediaKind::Json, text }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TextChunk {
    pub record_id: RecordId,
    pub from_metadata: bool,
    pub file_name: Option<String>,
    pub text: String,
    pub ordinal: u32,
}

pub fn chunk_document(doc: &RawDocument, config: &ChunkConfig) -> Result<Vec<TextChunk>, ChunkError> {
    let texts = match (&doc.source, doc.media_kind) {
        (_, MediaKind::Unsupported) => return Err(ChunkError::UnsupportedMediaKind(doc.media_kind)),
        (SyncSubject::Metadata, _) | (_, MediaKind::Json) => split_json(&doc.text, config.json_max_chunk_chars)?,
        (_, MediaKind::Code) => split_code(&doc.text, config.max_chunk_chars, config.overlap_chars)?,
        _ => split_plain(&doc.text, config.max_chunk_chars, config.overlap_chars)?,
    };
    let file_name = doc.source.file_name().map(str::to_owned);
    Ok(texts
        .into_iter()
        .enumerate()
        .map(|(i, text)| TextChunk {
            record_id: doc.record_id,
            from_metadata: file_name.is_none(),
            file_name: file_name.clone(),
            text,
            ordinal: i as u32,
        })
        .collect())
}

pub(crate) fn char_len(s: &str) -> usize {
    s.chars().count()
}
