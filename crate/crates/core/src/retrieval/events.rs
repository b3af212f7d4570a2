use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ids::RecordId;

/// What part of a record changed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", content = "file_name")]
pub enum SyncSubject {
    Metadata,
    File(String),
}

impl SyncSubject {
    pub fn file_name(&self) -> Option<&str> {
        match self {
            SyncSubject::Metadata => None,
            SyncSubject::File(name) => Some(name),
        }
    }

    pub fn from_row(from_metadata: bool, file_name: Option<&str>) -> Self {
        match (from_metadata, file_name) {
            (false, Some(name)) => SyncSubject::File(name.to_owned()),
            _ => SyncSubject::Metadata,
        }
    }
}

impl fmt::Display for SyncSubject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SyncSubject::Metadata => f.write_str("metadata"),
            SyncSubject::File(name) => write!(f, "file:{name}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyncKind {
    CreatedOrUpdated,
    /// For [`SyncSubject::Metadata`] this means the whole record is gone.
    Deleted,
}

/// Change notification emitted by the repository.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyncEvent {
    pub record_id: RecordId,
    pub subject: SyncSubject,
    pub kind: SyncKind,
    /// Strictly increasing across all events of one repository.
    pub sequence: u64,
}

/// Receiver of repository change events. Called while the repository write
/// lock is held, so implementations must not block.
pub trait SyncSink: Send + Sync {
    fn publish(&self, event: SyncEvent);
}

/// Sink that drops every event.
#[derive(Debug, Default)]
pub struct NullSink;

impl SyncSink for NullSink {
    fn publish(&self, _event: SyncEvent) {}
}

/// Sink that buffers events in memory.
#[derive(Debug, Default)]
pub struct CollectingSink {
    events: parking_lot::Mutex<Vec<SyncEvent>>,
}

impl CollectingSink {
    pub fn take(&self) -> Vec<SyncEvent> {
        std::mem::take(&mut *self.events.lock())
    }

    pub fn len(&self) -> usize {
        self.events.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.lock().is_empty()
    }
}

impl SyncSink for CollectingSink {
    fn publish(&self, event: SyncEvent) {
        self.events.lock().push(event);
    }
}
