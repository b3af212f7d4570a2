//! Hierarchical navigable small-world graph.
//!
//! Layer 0 adjacency is kept in one flat array (`2 * m` slots per node) since
//! every search ends there; upper layers are sparse and stored per node.
//! Filtering happens inside the layer-0 beam search: nodes whose record is not
//! allowed (or that are tombstoned) are still expanded for routing but never
//! enter the result set.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::mem::size_of;

use parking_lot::Mutex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{neighbor_order, ChunkRow, HnswParams, IndexError, Neighbor};
use crate::ids::{ChunkId, RecordId};
use crate::scalar::{dot, normalize, Scalar};

/// Bytes attributed to an index with no nodes.
pub const GRAPH_HEADER_BYTES: usize = size_of::<HnswParams>() + 64;

const MAX_LEVEL: usize = 16;

/// Metadata columns of a stored row (the embedding lives in the flat vector
/// buffer).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredRow {
    pub id: ChunkId,
    pub record_id: RecordId,
    pub from_metadata: bool,
    pub file_name: Option<String>,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct MemoryReport {
    pub graph_bytes: usize,
    pub rows_bytes: usize,
    pub total_bytes: usize,
    pub vector_count: usize,
}

#[derive(Clone, Copy)]
struct Cand<S> {
    score: S,
    node: u32,
}

impl<S: Scalar> PartialEq for Cand<S> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<S: Scalar> Eq for Cand<S> {}
impl<S: Scalar> PartialOrd for Cand<S> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<S: Scalar> Ord for Cand<S> {
    // Greater = better: higher score, then lower node index.
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .partial_cmp(&other.score)
            .unwrap_or(Ordering::Equal)
            .then(other.node.cmp(&self.node))
    }
}

struct Visited {
    marks: Vec<u32>,
    epoch: u32,
}

impl Visited {
    fn prepare(&mut self, n: usize) {
        if self.marks.len() < n {
            self.marks.resize(n, 0);
        }
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.marks.iter_mut().for_each(|m| *m = 0);
            self.epoch = 1;
        }
    }

    /// Marks `node`; returns true if it was not yet visited.
    #[inline]
    fn insert(&mut self, node: u32) -> bool {
        let slot = &mut self.marks[node as usize];
        if *slot == self.epoch {
            false
        } else {
            *slot = self.epoch;
            true
        }
    }
}

pub struct HnswIndex<S: Scalar> {
    dim: usize,
    params: HnswParams,
    vectors: Vec<S>,
    rows: Vec<StoredRow>,
    levels: Vec<u8>,
    deleted: Vec<bool>,
    layer0: Vec<u32>,
    layer0_len: Vec<u16>,
    upper: Vec<Vec<Vec<u32>>>,
    entry: Option<u32>,
    max_level: usize,
    tombstones: usize,
    id_map: HashMap<ChunkId, u32>,
    by_record: HashMap<RecordId, Vec<u32>>,
    rng: ChaCha8Rng,
    level_draws: u64,
    visited_pool: Mutex<Vec<Visited>>,
}

impl<S: Scalar> std::fmt::Debug for HnswIndex<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HnswIndex")
            .field("dim", &self.dim)
            .field("params", &self.params)
            .field("nodes", &self.rows.len())
            .field("live", &self.len())
            .field("max_level", &self.max_level)
            .finish()
    }
}

impl<S: Scalar> HnswIndex<S> {
    pub fn new(dim: usize, params: HnswParams) -> Result<Self, IndexError> {
        params.validate()?;
        if dim == 0 {
            return Err(IndexError::InvalidParams("dimension must be positive".into()));
        }
        Ok(Self {
            dim,
            params,
            vectors: Vec::new(),
            rows: Vec::new(),
            levels: Vec::new(),
            deleted: Vec::new(),
            layer0: Vec::new(),
            layer0_len: Vec::new(),
            upper: Vec::new(),
            entry: None,
            max_level: 0,
            tombstones: 0,
            id_map: HashMap::new(),
            by_record: HashMap::new(),
            rng: ChaCha8Rng::seed_from_u64(params.seed),
            level_draws: 0,
            visited_pool: Mutex::new(Vec::new()),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn params(&self) -> &HnswParams {
        &self.params
    }

    pub fn set_ef_search(&mut self, ef: usize) {
        self.params.ef_search = ef.max(1);
    }

    /// Number of live (non-deleted) rows.
    pub fn len(&self) -> usize {
        self.rows.len() - self.tombstones
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of graph nodes including tombstones.
    pub fn node_count(&self) -> usize {
        self.rows.len()
    }

    pub fn contains(&self, id: ChunkId) -> bool {
        self.id_map.contains_key(&id)
    }

    pub fn get(&self, id: ChunkId) -> Option<&StoredRow> {
        self.id_map.get(&id).map(|&n| &self.rows[n as usize])
    }

    pub fn embedding(&self, id: ChunkId) -> Option<&[S]> {
        self.id_map.get(&id).map(|&n| self.vector(n))
    }

    /// Live rows in insertion order.
    pub fn rows(&self) -> impl Iterator<Item = &StoredRow> + '_ {
        self.rows
            .iter()
            .zip(&self.deleted)
            .filter(|(_, &d)| !d)
            .map(|(r, _)| r)
    }

    /// Live rows paired with their embeddings, in insertion order.
    pub fn rows_with_vectors(&self) -> impl Iterator<Item = (&StoredRow, &[S])> + '_ {
        (0..self.rows.len())
            .filter(|&n| !self.deleted[n])
            .map(|n| (&self.rows[n], self.vector(n as u32)))
    }

    pub fn record_ids(&self) -> impl Iterator<Item = RecordId> + '_ {
        self.by_record.keys().copied()
    }

    #[inline]
    fn vector(&self, node: u32) -> &[S] {
        let start = node as usize * self.dim;
        &self.vectors[start..start + self.dim]
    }

    fn max_links(&self, level: usize) -> usize {
        if level == 0 {
            self.params.m * 2
        } else {
            self.params.m
        }
    }

    #[inline]
    fn links(&self, node: u32, level: usize) -> &[u32] {
        if level == 0 {
            let cap = self.params.m * 2;
            let start = node as usize * cap;
            &self.layer0[start..start + self.layer0_len[node as usize] as usize]
        } else {
            &self.upper[node as usize][level - 1]
        }
    }

    fn set_links(&mut self, node: u32, level: usize, links: &[u32]) {
        if level == 0 {
            let cap = self.params.m * 2;
            debug_assert!(links.len() <= cap);
            let start = node as usize * cap;
            self.layer0[start..start + links.len()].copy_from_slice(links);
            self.layer0_len[node as usize] = links.len() as u16;
        } else {
            let list = &mut self.upper[node as usize][level - 1];
            list.clear();
            list.extend_from_slice(links);
        }
    }

    fn draw_level(&mut self) -> usize {
        let ml = 1.0 / (self.params.m as f64).ln();
        let u: f64 = self.rng.random();
        self.level_draws += 1;
        let level = (-(1.0 - u).ln() * ml).floor();
        (level as usize).min(MAX_LEVEL)
    }

    fn checked_query(&self, query: &[S]) -> Result<Vec<S>, IndexError> {
        if query.len() != self.dim {
            return Err(IndexError::DimensionMismatch { expected: self.dim, actual: query.len() });
        }
        let mut q = query.to_vec();
        if !normalize(&mut q) {
            return Err(IndexError::InvalidVector);
        }
        Ok(q)
    }

    /// Adds a row. The embedding is normalized to unit length on the way in.
    pub fn insert(&mut self, row: ChunkRow<S>) -> Result<(), IndexError> {
        if row.embedding.len() != self.dim {
            return Err(IndexError::DimensionMismatch {
                expected: self.dim,
                actual: row.embedding.len(),
            });
        }
        if self.id_map.contains_key(&row.id) {
            return Err(IndexError::DuplicateId(row.id));
        }
        if self.rows.len() >= u32::MAX as usize {
            return Err(IndexError::InvalidParams("index is full".into()));
        }
        let mut embedding = row.embedding;
        if !normalize(&mut embedding) {
            return Err(IndexError::InvalidVector);
        }

        let node = self.rows.len() as u32;
        let level = self.draw_level();
        self.vectors.extend_from_slice(&embedding);
        self.levels.push(level as u8);
        self.deleted.push(false);
        self.layer0.resize(self.layer0.len() + self.params.m * 2, 0);
        self.layer0_len.push(0);
        self.upper
            .push((0..level).map(|_| Vec::with_capacity(self.params.m)).collect());
        self.id_map.insert(row.id, node);
        self.by_record.entry(row.record_id).or_default().push(node);
        self.rows.push(StoredRow {
            id: row.id,
            record_id: row.record_id,
            from_metadata: row.from_metadata,
            file_name: row.file_name,
            text: row.text,
        });

        let Some(entry) = self.entry else {
            self.entry = Some(node);
            self.max_level = level;
            return Ok(());
        };

        let query = self.vector(node).to_vec();
        let mut ep = Cand { score: dot(&query, self.vector(entry)), node: entry };
        for lc in (level + 1..=self.max_level).rev() {
            ep = self.greedy_step(&query, ep, lc);
        }

        let mut entries = vec![ep];
        for lc in (0..=level.min(self.max_level)).rev() {
            let found = self.search_layer(&query, &entries, self.params.ef_construction, lc, |_| true);
            let selected = self.select_neighbors(&found, self.params.m);
            let selected_nodes: Vec<u32> = selected.iter().map(|c| c.node).collect();
            self.set_links(node, lc, &selected_nodes);
            for c in &selected {
                self.connect(c.node, node, c.score, lc);
            }
            entries = found;
        }

        if level > self.max_level {
            self.max_level = level;
            self.entry = Some(node);
        }
        Ok(())
    }

    /// Adds `new` to `target`'s adjacency, pruning with the selection heuristic
    /// if the list overflows.
    fn connect(&mut self, target: u32, new: u32, score: S, level: usize) {
        let cap = self.max_links(level);
        let current = self.links(target, level);
        if current.contains(&new) {
            return;
        }
        if current.len() < cap {
            let mut next = current.to_vec();
            next.push(new);
            self.set_links(target, level, &next);
            return;
        }
        let base = self.vector(target);
        let mut cands: Vec<Cand<S>> = current
            .iter()
            .map(|&n| Cand { score: dot(base, self.vector(n)), node: n })
            .collect();
        cands.push(Cand { score, node: new });
        cands.sort_unstable_by(|a, b| b.cmp(a));
        let kept: Vec<u32> = self.select_neighbors(&cands, cap).iter().map(|c| c.node).collect();
        self.set_links(target, level, &kept);
    }

    /// Diversity heuristic: keep a candidate only if it is closer to the base
    /// than to every already-kept neighbor. Remaining slots are refilled with
    /// the best discarded candidates. `cands` must be sorted best-first.
    fn select_neighbors(&self, cands: &[Cand<S>], m: usize) -> Vec<Cand<S>> {
        if cands.len() <= m {
            return cands.to_vec();
        }
        let mut kept: Vec<Cand<S>> = Vec::with_capacity(m);
        let mut discarded: Vec<Cand<S>> = Vec::new();
        for c in cands {
            if kept.len() >= m {
                break;
            }
            let v = self.vector(c.node);
            let diverse = kept.iter().all(|k| dot(v, self.vector(k.node)) < c.score);
            if diverse {
                kept.push(*c);
            } else {
                discarded.push(*c);
            }
        }
        for d in discarded {
            if kept.len() >= m {
                break;
            }
            kept.push(d);
        }
        kept
    }

    fn greedy_step(&self, query: &[S], mut best: Cand<S>, level: usize) -> Cand<S> {
        loop {
            let mut improved = false;
            for &n in self.links(best.node, level) {
                let score = dot(query, self.vector(n));
                let cand = Cand { score, node: n };
                if cand > best {
                    best = cand;
                    improved = true;
                }
            }
            if !improved {
                return best;
            }
        }
    }

    fn take_visited(&self) -> Visited {
        let mut v = self
            .visited_pool
            .lock()
            .pop()
            .unwrap_or(Visited { marks: Vec::new(), epoch: 0 });
        v.prepare(self.rows.len());
        v
    }

    /// Beam search on one layer. Returns up to `ef` emittable nodes sorted
    /// best-first. Non-emittable nodes still route the search.
    fn search_layer(
        &self,
        query: &[S],
        entries: &[Cand<S>],
        ef: usize,
        level: usize,
        emit: impl Fn(u32) -> bool,
    ) -> Vec<Cand<S>> {
        let mut visited = self.take_visited();
        let mut candidates: BinaryHeap<Cand<S>> = BinaryHeap::new();
        let mut results: BinaryHeap<Reverse<Cand<S>>> = BinaryHeap::new();

        for &e in entries {
            if !visited.insert(e.node) {
                continue;
            }
            candidates.push(e);
            if emit(e.node) {
                results.push(Reverse(e));
                if results.len() > ef {
                    results.pop();
                }
            }
        }

        while let Some(current) = candidates.pop() {
            if results.len() >= ef {
                if let Some(Reverse(worst)) = results.peek() {
                    if current.score < worst.score {
                        break;
                    }
                }
            }
            for &n in self.links(current.node, level) {
                if !visited.insert(n) {
                    continue;
                }
                let score = dot(query, self.vector(n));
                let full = results.len() >= ef;
                let better = match results.peek() {
                    Some(Reverse(worst)) => score > worst.score,
                    None => true,
                };
                if !full || better {
                    let cand = Cand { score, node: n };
                    candidates.push(cand);
                    if emit(n) {
                        results.push(Reverse(cand));
                        if results.len() > ef {
                            results.pop();
                        }
                    }
                }
            }
        }

        self.visited_pool.lock().push(visited);
        let mut out: Vec<Cand<S>> = results.into_iter().map(|Reverse(c)| c).collect();
        out.sort_unstable_by(|a, b| b.cmp(a));
        out
    }

    /// Approximate top-`k` restricted to rows whose record is in `allowed`.
    pub fn knn_filtered(
        &self,
        query: &[S],
        k: usize,
        allowed: &HashSet<RecordId>,
    ) -> Result<Vec<Neighbor<S>>, IndexError> {
        if allowed.is_empty() {
            if query.len() != self.dim {
                return Err(IndexError::DimensionMismatch { expected: self.dim, actual: query.len() });
            }
            return Ok(Vec::new());
        }
        self.knn_filtered_by(query, k, |r| allowed.contains(&r))
    }

    /// Like [`knn_filtered`](Self::knn_filtered) with an arbitrary record predicate.
    pub fn knn_filtered_by(
        &self,
        query: &[S],
        k: usize,
        allowed: impl Fn(RecordId) -> bool,
    ) -> Result<Vec<Neighbor<S>>, IndexError> {
        let query = self.checked_query(query)?;
        let Some(entry) = self.entry else {
            return Ok(Vec::new());
        };
        if k == 0 {
            return Ok(Vec::new());
        }
        let mut ep = Cand { score: dot(&query, self.vector(entry)), node: entry };
        for lc in (1..=self.max_level).rev() {
            ep = self.greedy_step(&query, ep, lc);
        }
        let ef = self.params.ef_search.max(k);
        let found = self.search_layer(&query, &[ep], ef, 0, |n| {
            !self.deleted[n as usize] && allowed(self.rows[n as usize].record_id)
        });
        let mut out: Vec<Neighbor<S>> = found
            .into_iter()
            .map(|c| {
                let row = &self.rows[c.node as usize];
                Neighbor { id: row.id, record_id: row.record_id, score: c.score }
            })
            .collect();
        out.sort_by(neighbor_order);
        out.truncate(k);
        Ok(out)
    }

    /// Tombstones every row of `record`; returns how many were removed.
    pub fn delete_by_record(&mut self, record: RecordId) -> usize {
        let Some(nodes) = self.by_record.remove(&record) else {
            return 0;
        };
        for &n in &nodes {
            self.tombstone(n);
        }
        self.maybe_compact();
        nodes.len()
    }

    /// Tombstones every live row matching `pred`; returns how many were removed.
    pub fn delete_where(&mut self, pred: impl Fn(&StoredRow) -> bool) -> usize {
        let doomed: Vec<u32> = (0..self.rows.len() as u32)
            .filter(|&n| !self.deleted[n as usize] && pred(&self.rows[n as usize]))
            .collect();
        for &n in &doomed {
            let record = self.rows[n as usize].record_id;
            if let Some(list) = self.by_record.get_mut(&record) {
                list.retain(|&x| x != n);
                if list.is_empty() {
                    self.by_record.remove(&record);
                }
            }
            self.tombstone(n);
        }
        if !doomed.is_empty() {
            self.maybe_compact();
        }
        doomed.len()
    }

    fn tombstone(&mut self, node: u32) {
        let idx = node as usize;
        if self.deleted[idx] {
            return;
        }
        self.deleted[idx] = true;
        self.tombstones += 1;
        self.id_map.remove(&self.rows[idx].id);
    }

    fn maybe_compact(&mut self) {
        if self.tombstones * 10 > self.rows.len() * 3 {
            self.compact();
        }
    }

    /// Rebuilds the graph from live rows in insertion order.
    pub fn compact(&mut self) {
        let mut fresh = Self::new(self.dim, self.params).expect("params already validated");
        let nodes: Vec<usize> = (0..self.rows.len()).filter(|&n| !self.deleted[n]).collect();
        for n in nodes {
            let row = self.rows[n].clone();
            let embedding = self.vector(n as u32).to_vec();
            fresh
                .insert(ChunkRow {
                    id: row.id,
                    record_id: row.record_id,
                    from_metadata: row.from_metadata,
                    file_name: row.file_name,
                    embedding,
                    text: row.text,
                })
                .expect("live rows are unique and valid");
        }
        *self = fresh;
    }

    /// Moves every live row to the record chosen by `assign`. Used when
    /// ownership of content changes and by the benchmarks to relabel a corpus.
    pub fn reassign_records(&mut self, assign: impl Fn(&StoredRow) -> RecordId) {
        self.by_record.clear();
        for n in 0..self.rows.len() {
            if self.deleted[n] {
                continue;
            }
            let record = assign(&self.rows[n]);
            self.rows[n].record_id = record;
            self.by_record.entry(record).or_default().push(n as u32);
        }
    }

    /// Deterministic byte accounting of the graph and the stored rows.
    pub fn memory_report(&self) -> MemoryReport {
        let n = self.rows.len();
        let upper_lists: usize = self.upper.iter().map(|l| l.len()).sum();
        let map_entry = size_of::<ChunkId>() + size_of::<u32>() + 1;
        let graph_bytes = GRAPH_HEADER_BYTES
            + self.layer0.len() * size_of::<u32>()
            + self.layer0_len.len() * size_of::<u16>()
            + n * (size_of::<u8>() + size_of::<Vec<Vec<u32>>>())
            + upper_lists * (size_of::<Vec<u32>>() + self.params.m * size_of::<u32>())
            + self.id_map.capacity() * map_entry;
        let payload: usize = self
            .rows
            .iter()
            .map(|r| r.text.len() + r.file_name.as_ref().map_or(0, |f| f.len()))
            .sum();
        let rows_bytes = self.vectors.len() * S::BYTES
            + n * (size_of::<StoredRow>() + size_of::<bool>())
            + payload;
        MemoryReport {
            graph_bytes,
            rows_bytes,
            total_bytes: graph_bytes + rows_bytes,
            vector_count: self.len(),
        }
    }

    // Accessors for the snapshot module.

    pub(super) fn raw_parts(&self) -> RawParts<'_, S> {
        RawParts {
            dim: self.dim,
            params: self.params,
            vectors: &self.vectors,
            rows: &self.rows,
            levels: &self.levels,
            deleted: &self.deleted,
            entry: self.entry,
            max_level: self.max_level,
            level_draws: self.level_draws,
        }
    }

    pub(super) fn adjacency(&self, node: u32, level: usize) -> &[u32] {
        self.links(node, level)
    }

    pub(super) fn from_raw(raw: OwnedParts<S>) -> Result<Self, IndexError> {
        let mut index = Self::new(raw.dim, raw.params)?;
        let n = raw.rows.len();
        if raw.vectors.len() != n * raw.dim || raw.levels.len() != n || raw.deleted.len() != n {
            return Err(IndexError::CorruptSnapshot("inconsistent node arrays".into()));
        }
        if raw.adjacency.len() != n {
            return Err(IndexError::CorruptSnapshot("adjacency count mismatch".into()));
        }
        for _ in 0..raw.level_draws {
            let _: f64 = index.rng.random();
        }
        index.level_draws = raw.level_draws;
        index.vectors = raw.vectors;
        index.levels = raw.levels;
        index.deleted = raw.deleted;
        index.entry = raw.entry;
        index.max_level = raw.max_level;
        let cap0 = raw.params.m * 2;
        index.layer0 = vec![0; n * cap0];
        index.layer0_len = vec![0; n];
        index.upper = Vec::with_capacity(n);
        for (node, lists) in raw.adjacency.into_iter().enumerate() {
            if lists.len() != index.levels[node] as usize + 1 {
                return Err(IndexError::CorruptSnapshot(format!("node {node} level mismatch")));
            }
            let mut iter = lists.into_iter();
            let l0 = iter.next().unwrap_or_default();
            if l0.len() > cap0 || l0.iter().any(|&x| x as usize >= n) {
                return Err(IndexError::CorruptSnapshot(format!("node {node} bad layer-0 links")));
            }
            index.layer0[node * cap0..node * cap0 + l0.len()].copy_from_slice(&l0);
            index.layer0_len[node] = l0.len() as u16;
            let mut ups = Vec::new();
            for l in iter {
                if l.len() > raw.params.m || l.iter().any(|&x| x as usize >= n) {
                    return Err(IndexError::CorruptSnapshot(format!("node {node} bad links")));
                }
                let mut v = Vec::with_capacity(raw.params.m);
                v.extend_from_slice(&l);
                ups.push(v);
            }
            index.upper.push(ups);
        }
        if let Some(e) = index.entry {
            if e as usize >= n {
                return Err(IndexError::CorruptSnapshot("entry point out of range".into()));
            }
        }
        for (node, row) in raw.rows.iter().enumerate() {
            if index.deleted[node] {
                index.tombstones += 1;
                continue;
            }
            if index.id_map.insert(row.id, node as u32).is_some() {
                return Err(IndexError::CorruptSnapshot(format!("duplicate id {}", row.id)));
            }
            index.by_record.entry(row.record_id).or_default().push(node as u32);
        }
        index.rows = raw.rows;
        Ok(index)
    }
}

pub(super) struct RawParts<'a, S> {
    pub dim: usize,
    pub params: HnswParams,
    pub vectors: &'a [S],
    pub rows: &'a [StoredRow],
    pub levels: &'a [u8],
    pub deleted: &'a [bool],
    pub entry: Option<u32>,
    pub max_level: usize,
    pub level_draws: u64,
}

pub(super) struct OwnedParts<S> {
    pub dim: usize,
    pub params: HnswParams,
    pub vectors: Vec<S>,
    pub rows: Vec<StoredRow>,
    pub levels: Vec<u8>,
    pub deleted: Vec<bool>,
    pub adjacency: Vec<Vec<Vec<u32>>>,
    pub entry: Option<u32>,
    pub max_level: usize,
    pub level_draws: u64,
}
