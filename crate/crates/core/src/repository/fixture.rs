//! Newline-delimited JSON import, one object per record.
//!
//! Links may point forward to records later in the same file; they are
//! resolved after all records are created.

use std::path::Path;

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::model::{Capability, MediaKind};
use super::store::{ImportBatch, ImportRecord, NewRecord, Repository};
use super::RepoError;
use crate::ids::{RecordId, UserId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureLine {
    pub identifier: String,
    pub title: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub extras: Map<String, Value>,
    #[serde(default)]
    pub files: Vec<FixtureFile>,
    #[serde(default)]
    pub links: Vec<FixtureLink>,
    #[serde(default)]
    pub grants: Vec<FixtureGrant>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureFile {
    pub name: String,
    pub media_kind: MediaKind,
    pub content_base64: String,
}

impl FixtureFile {
    pub fn text(name: impl Into<String>, media_kind: MediaKind, text: &str) -> Self {
        Self {
            name: name.into(),
            media_kind,
            content_base64: base64::engine::general_purpose::STANDARD.encode(text),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureLink {
    pub to_identifier: String,
    #[serde(default)]
    pub annotation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureGrant {
    pub user: UserId,
    pub capability: Capability,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ImportSummary {
    pub records: usize,
    pub files: usize,
    pub links: usize,
    pub record_ids: Vec<RecordId>,
}

/// Imports NDJSON text. Blank lines are ignored. Either every line is
/// applied or none is.
pub fn import_ndjson(repo: &Repository, text: &str) -> Result<ImportSummary, RepoError> {
    let mut lines = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: FixtureLine =
            serde_json::from_str(line).map_err(|e| RepoError::Fixture(format!("line {}: {e}", n + 1)))?;
        lines.push(parsed);
    }
    import_lines(repo, lines)
}

pub fn load_fixture(repo: &Repository, path: impl AsRef<Path>) -> Result<ImportSummary, RepoError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| RepoError::Fixture(format!("{}: {e}", path.display())))?;
    import_ndjson(repo, &text)
}

pub fn import_lines(repo: &Repository, lines: Vec<FixtureLine>) -> Result<ImportSummary, RepoError> {
    let b64 = base64::engine::general_purpose::STANDARD;
    let mut batch = ImportBatch::default();
    let mut summary = ImportSummary::default();
    for line in lines {
        let mut files = Vec::with_capacity(line.files.len());
        for f in line.files {
            if f.name.is_empty() {
                return Err(RepoError::InvalidFileName);
            }
            let content = b64
                .decode(f.content_base64.as_bytes())
                .map_err(|e| RepoError::Fixture(format!("{}/{}: {e}", line.identifier, f.name)))?;
            files.push((f.name, f.media_kind, content));
        }
        summary.files += files.len();
        for l in line.links {
            batch.links.push((line.identifier.clone(), l.to_identifier, l.annotation));
        }
        batch.records.push(ImportRecord {
            record: NewRecord {
                identifier: line.identifier,
                title: line.title,
                description: line.description,
                extras: line.extras,
            },
            files,
            grants: line.grants.into_iter().map(|g| (g.user, g.capability)).collect(),
        });
    }
    summary.records = batch.records.len();
    summary.links = batch.links.len();
    summary.record_ids = repo.import_batch(batch)?;
    Ok(summary)
}
