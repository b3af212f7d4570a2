use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use chrono::Utc;
use parking_lot::RwLock;
use serde_json::{Map, Value};

use super::model::*;
use super::RepoError;
use crate::ids::{CollectionId, RecordId, UserId};
use crate::retrieval::events::{NullSink, SyncEvent, SyncKind, SyncSink, SyncSubject};

#[derive(Debug, Clone, Copy)]
pub struct RepositoryConfig {
    pub max_extras_depth: usize,
    pub max_extras_bytes: usize,
}

impl Default for RepositoryConfig {
    fn default() -> Self {
        Self { max_extras_depth: 32, max_extras_bytes: 1 << 20 }
    }
}

/// Fields supplied when creating a record.
#[derive(Debug, Clone, Default)]
pub struct NewRecord {
    pub identifier: String,
    pub title: String,
    pub description: String,
    pub extras: Map<String, Value>,
}

/// Partial metadata update; `None` leaves a field unchanged.
#[derive(Debug, Clone, Default)]
pub struct MetadataPatch {
    pub title: Option<String>,
    pub description: Option<String>,
    pub extras: Option<Map<String, Value>>,
}

#[derive(Default)]
struct State {
    records: BTreeMap<RecordId, Record>,
    by_identifier: HashMap<String, RecordId>,
    collections: BTreeMap<CollectionId, Collection>,
    collection_identifiers: HashMap<String, CollectionId>,
    links: Vec<Link>,
    grants: HashMap<UserId, BTreeMap<RecordId, Capability>>,
    users: BTreeMap<UserId, User>,
    tokens: HashMap<String, UserId>,
    next_record: u64,
    next_collection: u64,
    next_sequence: u64,
}

impl State {
    fn capability(&self, user: &UserId, record: RecordId) -> Option<Capability> {
        self.grants.get(user).and_then(|g| g.get(&record)).copied()
    }

    fn require(&self, user: &UserId, record: RecordId, needed: Capability) -> Result<(), RepoError> {
        if !self.users.contains_key(user) {
            return Err(RepoError::UnknownUser(user.clone()));
        }
        if !self.records.contains_key(&record) {
            return Err(RepoError::NotFound);
        }
        match self.capability(user, record) {
            Some(c) if c.allows(needed) => Ok(()),
            _ => Err(RepoError::Forbidden),
        }
    }

    fn can_read(&self, user: &UserId, record: RecordId) -> bool {
        self.capability(user, record).is_some()
    }

    /// Collections have no grants of their own: one readable member suffices.
    fn collection_visible(&self, user: &UserId, id: CollectionId) -> bool {
        self.collections
            .get(&id)
            .is_some_and(|c| c.member_record_ids.iter().any(|&r| self.can_read(user, r)))
    }

    fn object_exists(&self, obj: ObjectRef) -> bool {
        match obj.kind {
            ObjectType::Record => self.records.contains_key(&RecordId(obj.id)),
            ObjectType::Collection => self.collections.contains_key(&CollectionId(obj.id)),
        }
    }

    fn object_visible(&self, user: &UserId, obj: ObjectRef) -> bool {
        match obj.kind {
            ObjectType::Record => self.can_read(user, RecordId(obj.id)),
            ObjectType::Collection => self.collection_visible(user, CollectionId(obj.id)),
        }
    }

    fn event(&mut self, record_id: RecordId, subject: SyncSubject, kind: SyncKind) -> SyncEvent {
        self.next_sequence += 1;
        SyncEvent { record_id, subject, kind, sequence: self.next_sequence }
    }
}

/// In-memory access-controlled record store.
///
/// All state sits behind one reader-writer lock; change events are published
/// to the configured [`SyncSink`] while the write lock is held, which keeps
/// per-record event order identical to commit order.
pub struct Repository {
    state: RwLock<State>,
    config: RepositoryConfig,
    sink: RwLock<Arc<dyn SyncSink>>,
}

impl Default for Repository {
    fn default() -> Self {
        Self::new(RepositoryConfig::default())
    }
}

impl std::fmt::Debug for Repository {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = self.state.read();
        f.debug_struct("Repository")
            .field("records", &s.records.len())
            .field("users", &s.users.len())
            .finish()
    }
}

impl Repository {
    pub fn new(config: RepositoryConfig) -> Self {
        Self {
            state: RwLock::new(State { next_record: 1, next_collection: 1, ..State::default() }),
            config,
            sink: RwLock::new(Arc::new(NullSink)),
        }
    }

    pub fn set_sink(&self, sink: Arc<dyn SyncSink>) {
        *self.sink.write() = sink;
    }

    fn publish(&self, events: Vec<SyncEvent>) {
        let sink = self.sink.read().clone();
        for e in events {
            sink.publish(e);
        }
    }

    // ---- users and grants ----

    pub fn add_user(
        &self,
        user_id: impl Into<UserId>,
        display_name: impl Into<String>,
        bearer_token: impl Into<String>,
    ) -> Result<User, RepoError> {
        let user = User {
            user_id: user_id.into(),
            display_name: display_name.into(),
            bearer_token: bearer_token.into(),
        };
        let mut s = self.state.write();
        if s.users.contains_key(&user.user_id) {
            return Err(RepoError::DuplicateUser(user.user_id));
        }
        if s.tokens.contains_key(&user.bearer_token) {
            return Err(RepoError::DuplicateToken);
        }
        s.tokens.insert(user.bearer_token.clone(), user.user_id.clone());
        s.users.insert(user.user_id.clone(), user.clone());
        Ok(user)
    }

    pub fn user_by_token(&self, token: &str) -> Option<User> {
        let s = self.state.read();
        s.tokens.get(token).and_then(|u| s.users.get(u)).cloned()
    }

    pub fn user_exists(&self, user: &UserId) -> bool {
        self.state.read().users.contains_key(user)
    }

    /// Grants `capability` on `record` to `subject`. The caller needs write.
    pub fn grant(
        &self,
        record: RecordId,
        subject: &UserId,
        capability: Capability,
        caller: &UserId,
    ) -> Result<(), RepoError> {
        let mut s = self.state.write();
        s.require(caller, record, Capability::Write)?;
        if !s.users.contains_key(subject) {
            return Err(RepoError::UnknownUser(subject.clone()));
        }
        let slot = s.grants.entry(subject.clone()).or_default().entry(record).or_insert(capability);
        *slot = (*slot).max(capability);
        Ok(())
    }

    pub fn revoke(&self, record: RecordId, subject: &UserId, caller: &UserId) -> Result<(), RepoError> {
        let mut s = self.state.write();
        s.require(caller, record, Capability::Write)?;
        if let Some(g) = s.grants.get_mut(subject) {
            g.remove(&record);
        }
        Ok(())
    }

    /// Exactly the records `user` holds a read (or write) grant on.
    pub fn accessible_record_ids(&self, user: &UserId) -> Result<HashSet<RecordId>, RepoError> {
        let s = self.state.read();
        if !s.users.contains_key(user) {
            return Err(RepoError::UnknownUser(user.clone()));
        }
        Ok(s.grants.get(user).map(|g| g.keys().copied().collect()).unwrap_or_default())
    }

    pub fn can_read(&self, user: &UserId, record: RecordId) -> bool {
        self.state.read().can_read(user, record)
    }

    // ---- records ----

    fn check_extras(&self, extras: &Map<String, Value>) -> Result<(), RepoError> {
        fn depth(v: &Value) -> usize {
            match v {
                Value::Object(m) => 1 + m.values().map(depth).max().unwrap_or(0),
                Value::Array(a) => 1 + a.iter().map(depth).max().unwrap_or(0),
                _ => 0,
            }
        }
        let d = 1 + extras.values().map(depth).max().unwrap_or(0);
        if d > self.config.max_extras_depth {
            return Err(RepoError::ExtrasTooDeep { depth: d, limit: self.config.max_extras_depth });
        }
        let size = serde_json::to_string(extras).map(|s| s.len()).unwrap_or(usize::MAX);
        if size > self.config.max_extras_bytes {
            return Err(RepoError::ExtrasTooLarge { size, limit: self.config.max_extras_bytes });
        }
        Ok(())
    }

    pub fn create_record(&self, new: NewRecord, owner: &UserId) -> Result<Record, RepoError> {
        self.check_extras(&new.extras)?;
        let mut s = self.state.write();
        if !s.users.contains_key(owner) {
            return Err(RepoError::UnknownUser(owner.clone()));
        }
        let record = insert_record(&mut s, new)?;
        s.grants.entry(owner.clone()).or_default().insert(record.record_id, Capability::Write);
        let evt = s.event(record.record_id, SyncSubject::Metadata, SyncKind::CreatedOrUpdated);
        self.publish(vec![evt]);
        Ok(record)
    }

    pub fn update_metadata(
        &self,
        record_id: RecordId,
        patch: MetadataPatch,
        caller: &UserId,
    ) -> Result<Record, RepoError> {
        if let Some(extras) = &patch.extras {
            self.check_extras(extras)?;
        }
        let mut s = self.state.write();
        s.require(caller, record_id, Capability::Write)?;
        let record = s.records.get_mut(&record_id).ok_or(RepoError::NotFound)?;
        if let Some(t) = patch.title {
            record.title = t;
        }
        if let Some(d) = patch.description {
            record.description = d;
        }
        if let Some(e) = patch.extras {
            record.extras = e;
        }
        record.updated_at = Utc::now();
        let out = record.clone();
        let evt = s.event(record_id, SyncSubject::Metadata, SyncKind::CreatedOrUpdated);
        self.publish(vec![evt]);
        Ok(out)
    }

    /// Stores a file, replacing any file of the same name on the record.
    pub fn upload_file(
        &self,
        record_id: RecordId,
        file_name: &str,
        media_kind: MediaKind,
        content: Vec<u8>,
        caller: &UserId,
    ) -> Result<FileEntry, RepoError> {
        if file_name.is_empty() {
            return Err(RepoError::InvalidFileName);
        }
        let mut s = self.state.write();
        s.require(caller, record_id, Capability::Write)?;
        let record = s.records.get_mut(&record_id).ok_or(RepoError::NotFound)?;
        let entry = FileEntry::new(file_name, media_kind, content);
        match record.files.iter_mut().find(|f| f.file_name == file_name) {
            Some(slot) => *slot = entry.clone(),
            None => record.files.push(entry.clone()),
        }
        record.updated_at = Utc::now();
        let file_evt = s.event(record_id, SyncSubject::File(file_name.to_owned()), SyncKind::CreatedOrUpdated);
        // The metadata document lists file names, so it changes too.
        let meta_evt = s.event(record_id, SyncSubject::Metadata, SyncKind::CreatedOrUpdated);
        self.publish(vec![file_evt, meta_evt]);
        Ok(entry)
    }

    pub fn delete_file(&self, record_id: RecordId, file_name: &str, caller: &UserId) -> Result<(), RepoError> {
        let mut s = self.state.write();
        s.require(caller, record_id, Capability::Write)?;
        let record = s.records.get_mut(&record_id).ok_or(RepoError::NotFound)?;
        let before = record.files.len();
        record.files.retain(|f| f.file_name != file_name);
        if record.files.len() == before {
            return Err(RepoError::NotFound);
        }
        record.updated_at = Utc::now();
        let file_evt = s.event(record_id, SyncSubject::File(file_name.to_owned()), SyncKind::Deleted);
        let meta_evt = s.event(record_id, SyncSubject::Metadata, SyncKind::CreatedOrUpdated);
        self.publish(vec![file_evt, meta_evt]);
        Ok(())
    }

    /// Removes the record with its files, links, grants and memberships.
    pub fn delete_record(&self, record_id: RecordId, caller: &UserId) -> Result<(), RepoError> {
        let mut s = self.state.write();
        s.require(caller, record_id, Capability::Write)?;
        let record = s.records.remove(&record_id).ok_or(RepoError::NotFound)?;
        s.by_identifier.remove(&record.identifier);
        let me = ObjectRef::record(record_id);
        s.links.retain(|l| l.from != me && l.to != me);
        for g in s.grants.values_mut() {
            g.remove(&record_id);
        }
        for c in s.collections.values_mut() {
            c.member_record_ids.remove(&record_id);
        }
        let evt = s.event(record_id, SyncSubject::Metadata, SyncKind::Deleted);
        self.publish(vec![evt]);
        Ok(())
    }

    pub fn get_record(&self, record_id: RecordId, caller: &UserId) -> Result<Record, RepoError> {
        let s = self.state.read();
        s.require(caller, record_id, Capability::Read)?;
        s.records.get(&record_id).cloned().ok_or(RepoError::NotFound)
    }

    /// Records readable by `caller`, ascending by id.
    pub fn list_records(&self, caller: &UserId) -> Result<Vec<Record>, RepoError> {
        let s = self.state.read();
        if !s.users.contains_key(caller) {
            return Err(RepoError::UnknownUser(caller.clone()));
        }
        let Some(grants) = s.grants.get(caller) else {
            return Ok(Vec::new());
        };
        Ok(grants.keys().filter_map(|id| s.records.get(id).cloned()).collect())
    }

    pub fn record_id_by_identifier(&self, identifier: &str) -> Option<RecordId> {
        self.state.read().by_identifier.get(identifier).copied()
    }

    /// Canonical metadata document for `caller`.
    pub fn get_metadata(&self, record_id: RecordId, caller: &UserId) -> Result<String, RepoError> {
        let s = self.state.read();
        s.require(caller, record_id, Capability::Read)?;
        let record = s.records.get(&record_id).ok_or(RepoError::NotFound)?;
        Ok(metadata_document(record))
    }

    /// Unchecked metadata document used by the synchronization worker.
    pub fn metadata_for_sync(&self, record_id: RecordId) -> Option<String> {
        self.state.read().records.get(&record_id).map(metadata_document)
    }

    /// Unchecked file lookup used by the synchronization worker.
    pub fn file_for_sync(&self, record_id: RecordId, file_name: &str) -> Option<FileEntry> {
        self.state.read().records.get(&record_id)?.file(file_name).cloned()
    }

    /// Unchecked snapshot of every record id with its file names, used to
    /// rebuild the vector table from scratch.
    pub fn all_subjects(&self) -> Vec<(RecordId, Vec<String>)> {
        self.state
            .read()
            .records
            .values()
            .map(|r| (r.record_id, r.files.iter().map(|f| f.file_name.clone()).collect()))
            .collect()
    }

    pub fn record_exists(&self, record_id: RecordId) -> bool {
        self.state.read().records.contains_key(&record_id)
    }

    pub fn record_count(&self) -> usize {
        self.state.read().records.len()
    }

    /// Title of a record the caller can read.
    pub fn title_if_readable(&self, record_id: RecordId, caller: &UserId) -> Option<String> {
        let s = self.state.read();
        if s.can_read(caller, record_id) {
            s.records.get(&record_id).map(|r| r.title.clone())
        } else {
            None
        }
    }

    // ---- collections and links ----

    pub fn create_collection(&self, identifier: &str, title: &str, caller: &UserId) -> Result<Collection, RepoError> {
        let mut s = self.state.write();
        if !s.users.contains_key(caller) {
            return Err(RepoError::UnknownUser(caller.clone()));
        }
        insert_collection(&mut s, identifier, title)
    }

    pub fn add_to_collection(&self, collection: CollectionId, record: RecordId, caller: &UserId) -> Result<(), RepoError> {
        let mut s = self.state.write();
        s.require(caller, record, Capability::Write)?;
        let c = s.collections.get_mut(&collection).ok_or(RepoError::NotFound)?;
        c.member_record_ids.insert(record);
        Ok(())
    }

    /// Creates a link. A record source needs write access; the target must be
    /// visible to the caller.
    pub fn create_link(&self, from: ObjectRef, to: ObjectRef, annotation: &str, caller: &UserId) -> Result<Link, RepoError> {
        let mut s = self.state.write();
        if !s.users.contains_key(caller) {
            return Err(RepoError::UnknownUser(caller.clone()));
        }
        if !s.object_exists(from) || !s.object_exists(to) {
            return Err(RepoError::NotFound);
        }
        if from.kind == ObjectType::Record {
            s.require(caller, RecordId(from.id), Capability::Write)?;
        } else if !s.object_visible(caller, from) {
            return Err(RepoError::Forbidden);
        }
        if !s.object_visible(caller, to) {
            return Err(RepoError::Forbidden);
        }
        let link = Link { from, to, annotation: annotation.to_owned() };
        s.links.push(link.clone());
        Ok(link)
    }

    /// Links touching the object whose other endpoint the caller can see.
    pub fn get_connections(&self, object_id: u64, object_type: &str, caller: &UserId) -> Result<Vec<Link>, RepoError> {
        let kind: ObjectType = object_type
            .parse()
            .map_err(RepoError::InvalidObjectType)?;
        let obj = ObjectRef { id: object_id, kind };
        let s = self.state.read();
        if !s.users.contains_key(caller) {
            return Err(RepoError::UnknownUser(caller.clone()));
        }
        if !s.object_exists(obj) {
            return Err(RepoError::NotFound);
        }
        if !s.object_visible(caller, obj) {
            return Err(RepoError::Forbidden);
        }
        Ok(s
            .links
            .iter()
            .filter(|l| l.from == obj || l.to == obj)
            .filter(|l| {
                let other = if l.from == obj { l.to } else { l.from };
                s.object_visible(caller, other)
            })
            .cloned()
            .collect())
    }

    /// Display title of any object visible to the caller.
    pub fn object_title(&self, obj: ObjectRef, caller: &UserId) -> Option<String> {
        let s = self.state.read();
        if !s.object_visible(caller, obj) {
            return None;
        }
        match obj.kind {
            ObjectType::Record => s.records.get(&RecordId(obj.id)).map(|r| r.title.clone()),
            ObjectType::Collection => s.collections.get(&CollectionId(obj.id)).map(|c| c.title.clone()),
        }
    }

    /// Checks referential integrity of links and memberships.
    pub fn check_integrity(&self) -> Result<(), String> {
        let s = self.state.read();
        for l in &s.links {
            if !s.object_exists(l.from) || !s.object_exists(l.to) {
                return Err(format!("dangling link {l:?}"));
            }
        }
        for c in s.collections.values() {
            if let Some(r) = c.member_record_ids.iter().find(|r| !s.records.contains_key(r)) {
                return Err(format!("collection {} lists missing record {r}", c.collection_id));
            }
        }
        Ok(())
    }

    // ---- bulk import ----

    /// Applies one batch of imported objects under a single write lock.
    pub(super) fn import_batch(&self, batch: ImportBatch) -> Result<Vec<RecordId>, RepoError> {
        for r in &batch.records {
            self.check_extras(&r.record.extras)?;
        }
        let mut s = self.state.write();
        let mut fresh = HashSet::new();
        for r in &batch.records {
            let ident = &r.record.identifier;
            if !is_valid_identifier(ident) {
                return Err(RepoError::InvalidIdentifier(ident.clone()));
            }
            if s.by_identifier.contains_key(ident) || !fresh.insert(ident.as_str()) {
                return Err(RepoError::DuplicateIdentifier(ident.clone()));
            }
            for (u, _) in &r.grants {
                if !s.users.contains_key(u) {
                    return Err(RepoError::UnknownUser(u.clone()));
                }
            }
        }
        for (from, to, _) in &batch.links {
            for ident in [from, to] {
                if !fresh.contains(ident.as_str()) && !s.by_identifier.contains_key(ident) {
                    return Err(RepoError::Fixture(format!("link references unknown identifier {ident}")));
                }
            }
        }
        let mut ids = Vec::with_capacity(batch.records.len());
        let mut events = Vec::new();
        for r in batch.records {
            let record = insert_record(&mut s, r.record)?;
            let id = record.record_id;
            for (name, kind, content) in r.files {
                let rec = s.records.get_mut(&id).expect("just inserted");
                let entry = FileEntry::new(name.clone(), kind, content);
                match rec.files.iter_mut().find(|f| f.file_name == name) {
                    Some(slot) => *slot = entry,
                    None => rec.files.push(entry),
                }
                events.push(s.event(id, SyncSubject::File(name), SyncKind::CreatedOrUpdated));
            }
            for (u, cap) in r.grants {
                let slot = s.grants.entry(u).or_default().entry(id).or_insert(cap);
                *slot = (*slot).max(cap);
            }
            events.push(s.event(id, SyncSubject::Metadata, SyncKind::CreatedOrUpdated));
            ids.push(id);
        }
        for (from_ident, to_ident, annotation) in batch.links {
            let from = s.by_identifier[&from_ident];
            let to = s.by_identifier[&to_ident];
            s.links.push(Link { from: ObjectRef::record(from), to: ObjectRef::record(to), annotation });
        }
        self.publish(events);
        Ok(ids)
    }
}

pub(super) struct ImportRecord {
    pub record: NewRecord,
    pub files: Vec<(String, MediaKind, Vec<u8>)>,
    pub grants: Vec<(UserId, Capability)>,
}

#[derive(Default)]
pub(super) struct ImportBatch {
    pub records: Vec<ImportRecord>,
    pub links: Vec<(String, String, String)>,
}

fn insert_record(s: &mut State, new: NewRecord) -> Result<Record, RepoError> {
    if !is_valid_identifier(&new.identifier) {
        return Err(RepoError::InvalidIdentifier(new.identifier));
    }
    if s.by_identifier.contains_key(&new.identifier) {
        return Err(RepoError::DuplicateIdentifier(new.identifier));
    }
    let id = RecordId(s.next_record);
    s.next_record += 1;
    let now = Utc::now();
    let record = Record {
        record_id: id,
        identifier: new.identifier,
        title: new.title,
        description: new.description,
        extras: new.extras,
        files: Vec::new(),
        created_at: now,
        updated_at: now,
    };
    s.by_identifier.insert(record.identifier.clone(), id);
    s.records.insert(id, record.clone());
    Ok(record)
}

fn insert_collection(s: &mut State, identifier: &str, title: &str) -> Result<Collection, RepoError> {
    if !is_valid_identifier(identifier) {
        return Err(RepoError::InvalidIdentifier(identifier.to_owned()));
    }
    if s.collection_identifiers.contains_key(identifier) {
        return Err(RepoError::DuplicateIdentifier(identifier.to_owned()));
    }
    let id = CollectionId(s.next_collection);
    s.next_collection += 1;
    let c = Collection {
        collection_id: id,
        identifier: identifier.to_owned(),
        title: title.to_owned(),
        member_record_ids: BTreeSet::new(),
    };
    s.collection_identifiers.insert(identifier.to_owned(), id);
    s.collections.insert(id, c.clone());
    Ok(c)
}

/// Sorted-key JSON document describing a record.
pub fn metadata_document(record: &Record) -> String {
    let mut doc = Map::new();
    doc.insert("description".into(), Value::String(record.description.clone()));
    doc.insert("extras".into(), canonicalize(&Value::Object(record.extras.clone())));
    doc.insert(
        "files".into(),
        Value::Array(record.files.iter().map(|f| Value::String(f.file_name.clone())).collect()),
    );
    doc.insert("identifier".into(), Value::String(record.identifier.clone()));
    doc.insert("record_id".into(), Value::from(record.record_id.0));
    doc.insert("title".into(), Value::String(record.title.clone()));
    serde_json::to_string(&Value::Object(doc)).expect("json values always serialize")
}

/// Recursively sorts object keys.
pub fn canonicalize(v: &Value) -> Value {
    match v {
        Value::Object(m) => {
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            let mut out = Map::with_capacity(m.len());
            for k in keys {
                out.insert(k.clone(), canonicalize(&m[k]));
            }
            Value::Object(out)
        }
        Value::Array(a) => Value::Array(a.iter().map(canonicalize).collect()),
        other => other.clone(),
    }
}
