//! Binary snapshot of an [`HnswIndex`].
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic "ACLHNSW\0" | version u32 | scalar width u8 | dim u32
//! m u32 | ef_construction u32 | ef_search u32 | seed u64 | level draws u64
//! entry u32 (u32::MAX = none) | max level u32 | node count u64
//! node array:      per node  level u8, deleted u8, vector[dim]
//! adjacency lists: per node, per level 0..=level  count u16, ids u32[count]
//! row payloads:    per node  id u64, record u64, from_metadata u8,
//!                  file name (len u32, u32::MAX = none, utf-8), text (len u32, utf-8)
//! crc32 of everything above, u32
//! ```

use std::fs;
use std::path::Path;

use super::hnsw::OwnedParts;
use super::{HnswIndex, HnswParams, IndexError, StoredRow};
use crate::ids::{ChunkId, RecordId};
use crate::scalar::Scalar;

const MAGIC: &[u8; 8] = b"ACLHNSW\0";
const VERSION: u32 = 1;
const NONE: u32 = u32::MAX;

impl<S: Scalar> HnswIndex<S> {
    pub fn to_snapshot_bytes(&self) -> Vec<u8> {
        let raw = self.raw_parts();
        let n = raw.rows.len();
        let mut out = Vec::with_capacity(64 + raw.vectors.len() * S::BYTES + n * 64);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(S::BYTES as u8);
        out.extend_from_slice(&(raw.dim as u32).to_le_bytes());
        out.extend_from_slice(&(raw.params.m as u32).to_le_bytes());
        out.extend_from_slice(&(raw.params.ef_construction as u32).to_le_bytes());
        out.extend_from_slice(&(raw.params.ef_search as u32).to_le_bytes());
        out.extend_from_slice(&raw.params.seed.to_le_bytes());
        out.extend_from_slice(&raw.level_draws.to_le_bytes());
        out.extend_from_slice(&raw.entry.unwrap_or(NONE).to_le_bytes());
        out.extend_from_slice(&(raw.max_level as u32).to_le_bytes());
        out.extend_from_slice(&(n as u64).to_le_bytes());

        for node in 0..n {
            out.push(raw.levels[node]);
            out.push(raw.deleted[node] as u8);
            for &x in &raw.vectors[node * raw.dim..(node + 1) * raw.dim] {
                x.write_le(&mut out);
            }
        }
        for node in 0..n {
            for level in 0..=raw.levels[node] as usize {
                let links = self.adjacency(node as u32, level);
                out.extend_from_slice(&(links.len() as u16).to_le_bytes());
                for &l in links {
                    out.extend_from_slice(&l.to_le_bytes());
                }
            }
        }
        for row in raw.rows {
            out.extend_from_slice(&row.id.0.to_le_bytes());
            out.extend_from_slice(&row.record_id.0.to_le_bytes());
            out.push(row.from_metadata as u8);
            match &row.file_name {
                Some(name) => write_str(&mut out, name),
                None => out.extend_from_slice(&NONE.to_le_bytes()),
            }
            write_str(&mut out, &row.text);
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_snapshot_bytes(bytes: &[u8]) -> Result<Self, IndexError> {
        if bytes.len() < MAGIC.len() + 4 {
            return Err(IndexError::CorruptSnapshot("truncated".into()));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        if crc32fast::hash(body) != stored {
            return Err(IndexError::CorruptSnapshot("checksum mismatch".into()));
        }
        let mut r = Reader { buf: body, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(IndexError::CorruptSnapshot("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(IndexError::CorruptSnapshot(format!("unsupported version {version}")));
        }
        let width = r.u8()? as usize;
        if width != S::BYTES {
            return Err(IndexError::CorruptSnapshot(format!(
                "scalar width {width} does not match {}",
                S::BYTES
            )));
        }
        let dim = r.u32()? as usize;
        let params = HnswParams {
            m: r.u32()? as usize,
            ef_construction: r.u32()? as usize,
            ef_search: r.u32()? as usize,
            seed: r.u64()?,
        };
        params.validate()?;
        let level_draws = r.u64()?;
        let entry = match r.u32()? {
            NONE => None,
            e => Some(e),
        };
        let max_level = r.u32()? as usize;
        let n = usize::try_from(r.u64()?)
            .map_err(|_| IndexError::CorruptSnapshot("node count overflow".into()))?;
        // Each node needs at least its two flag bytes; reject absurd counts early.
        if n > body.len() / 2 || dim == 0 {
            return Err(IndexError::CorruptSnapshot("node count exceeds payload".into()));
        }

        let mut levels = Vec::with_capacity(n);
        let mut deleted = Vec::with_capacity(n);
        let mut vectors = Vec::with_capacity(n * dim);
        for _ in 0..n {
            levels.push(r.u8()?);
            deleted.push(match r.u8()? {
                0 => false,
                1 => true,
                other => return Err(IndexError::CorruptSnapshot(format!("bad flag {other}"))),
            });
            let raw = r.take(dim * S::BYTES)?;
            vectors.extend(raw.chunks_exact(S::BYTES).map(S::read_le));
        }
        let mut adjacency = Vec::with_capacity(n);
        for &level in &levels {
            let mut lists = Vec::with_capacity(level as usize + 1);
            for _ in 0..=level {
                let count = r.u16()? as usize;
                let mut list = Vec::with_capacity(count);
                for _ in 0..count {
                    list.push(r.u32()?);
                }
                lists.push(list);
            }
            adjacency.push(lists);
        }
        let mut rows = Vec::with_capacity(n);
        for _ in 0..n {
            let id = ChunkId(r.u64()?);
            let record_id = RecordId(r.u64()?);
            let from_metadata = r.u8()? != 0;
            let file_name = r.opt_str()?;
            let text = r.opt_str()?.ok_or_else(|| IndexError::CorruptSnapshot("missing text".into()))?;
            rows.push(StoredRow { id, record_id, from_metadata, file_name, text });
        }
        if r.pos != body.len() {
            return Err(IndexError::CorruptSnapshot("trailing bytes".into()));
        }
        HnswIndex::from_raw(OwnedParts {
            dim,
            params,
            vectors,
            rows,
            levels,
            deleted,
            adjacency,
            entry,
            max_level,
            level_draws,
        })
    }

    /// Writes a snapshot to `path`. Requires no concurrent writers.
    pub fn snapshot(&self, path: impl AsRef<Path>) -> Result<(), IndexError> {
        fs::write(path, self.to_snapshot_bytes())?;
        Ok(())
    }

    pub fn restore(path: impl AsRef<Path>) -> Result<Self, IndexError> {
        let bytes = fs::read(path)?;
        Self::from_snapshot_bytes(&bytes)
    }
}

fn write_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8], IndexError> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| IndexError::CorruptSnapshot("unexpected end of data".into()))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, IndexError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, IndexError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32, IndexError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, IndexError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn opt_str(&mut self) -> Result<Option<String>, IndexError> {
        let len = self.u32()?;
        if len == NONE {
            return Ok(None);
        }
        let raw = self.take(len as usize)?;
        String::from_utf8(raw.to_vec())
            .map(Some)
            .map_err(|_| IndexError::CorruptSnapshot("invalid utf-8".into()))
    }
}
