//! Access-controlled record store: records, files, collections, links and
//! per-user read/write grants.

mod fixture;
mod model;
mod store;

use thiserror::Error;

use crate::ids::UserId;

pub use fixture::{import_lines, import_ndjson, load_fixture, FixtureFile, FixtureGrant, FixtureLine, FixtureLink, ImportSummary};
pub use model::{
    is_valid_identifier, AccessGrant, Capability, Collection, FileEntry, Link, MediaKind, ObjectRef, ObjectType,
    Record, User,
};
pub use store::{canonicalize, metadata_document, MetadataPatch, NewRecord, Repository, RepositoryConfig};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RepoError {
    #[error("identifier {0:?} already in use")]
    DuplicateIdentifier(String),
    #[error("identifier {0:?} must match [a-z0-9-_]+")]
    InvalidIdentifier(String),
    #[error("unknown user {0}")]
    UnknownUser(UserId),
    #[error("user {0} already exists")]
    DuplicateUser(UserId),
    #[error("bearer token already assigned")]
    DuplicateToken,
    #[error("not found")]
    NotFound,
    #[error("forbidden")]
    Forbidden,
    #[error("invalid object type {0:?}; expected \"record\" or \"collection\"")]
    InvalidObjectType(String),
    #[error("file name must not be empty")]
    InvalidFileName,
    #[error("extras nested {depth} levels deep, limit {limit}")]
    ExtrasTooDeep { depth: usize, limit: usize },
    #[error("extras serialize to {size} bytes, limit {limit}")]
    ExtrasTooLarge { size: usize, limit: usize },
    #[error("fixture: {0}")]
    Fixture(String),
}
