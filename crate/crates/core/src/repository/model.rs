use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::ids::{CollectionId, RecordId, UserId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MediaKind {
    PlainText,
    Markdown,
    Code,
    Json,
    Unsupported,
}

impl MediaKind {
    pub fn is_supported(self) -> bool {
        !matches!(self, MediaKind::Unsupported)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MediaKind::PlainText => "plain_text",
            MediaKind::Markdown => "markdown",
            MediaKind::Code => "code",
            MediaKind::Json => "json",
            MediaKind::Unsupported => "unsupported",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileEntry {
    pub file_name: String,
    pub media_kind: MediaKind,
    #[serde(skip)]
    pub content: Vec<u8>,
    pub size_bytes: u64,
}

impl FileEntry {
    pub fn new(file_name: impl Into<String>, media_kind: MediaKind, content: Vec<u8>) -> Self {
        let size_bytes = content.len() as u64;
        Self { file_name: file_name.into(), media_kind, content, size_bytes }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub record_id: RecordId,
    pub identifier: String,
    pub title: String,
    pub description: String,
    /// Insertion-ordered key/value tree.
    pub extras: serde_json::Map<String, Value>,
    pub files: Vec<FileEntry>,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

impl Record {
    pub fn file(&self, name: &str) -> Option<&FileEntry> {
        self.files.iter().find(|f| f.file_name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectType {
    Record,
    Collection,
}

impl fmt::Display for ObjectType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ObjectType::Record => "record",
            ObjectType::Collection => "collection",
        })
    }
}

impl FromStr for ObjectType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "record" => Ok(ObjectType::Record),
            "collection" => Ok(ObjectType::Collection),
            other => Err(other.to_owned()),
        }
    }
}

/// A link endpoint: an object id plus its kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObjectRef {
    pub id: u64,
    #[serde(rename = "type")]
    pub kind: ObjectType,
}

impl ObjectRef {
    pub fn record(id: RecordId) -> Self {
        Self { id: id.0, kind: ObjectType::Record }
    }

    pub fn collection(id: CollectionId) -> Self {
        Self { id: id.0, kind: ObjectType::Collection }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Link {
    pub from: ObjectRef,
    pub to: ObjectRef,
    pub annotation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Collection {
    pub collection_id: CollectionId,
    pub identifier: String,
    pub title: String,
    pub member_record_ids: std::collections::BTreeSet<RecordId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capability {
    Read,
    Write,
}

impl Capability {
    pub fn allows(self, needed: Capability) -> bool {
        self >= needed
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AccessGrant {
    pub subject: UserId,
    pub resource: RecordId,
    pub capability: Capability,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct User {
    pub user_id: UserId,
    pub display_name: String,
    #[serde(skip_serializing)]
    pub bearer_token: String,
}

/// `[a-z0-9-_]+`
pub fn is_valid_identifier(s: &str) -> bool {
    !s.is_empty()
        && s.bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-' || b == b'_')
}
