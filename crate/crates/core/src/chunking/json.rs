//! JSON splitter that keeps fragments parseable.
//!
//! A chunk carries one or more sibling subtrees wrapped in the object keys
//! leading to them from the root. Array positions are not kept: an element
//! that has to be carried alone is wrapped as a one-element array.

use serde_json::{Map, Value};

use super::text::split_plain;
use super::{char_len, ChunkError};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PathStep {
    Key(String),
    /// Some element of an array.
    Elem,
}

/// Splits a JSON document into chunks of at most `max_chunk_chars`
/// characters, each itself a JSON document in compact form.
///
/// A string leaf too long for any chunk is cut with [`split_plain`] (no
/// overlap) and every piece is wrapped in the leaf's path. Other scalar
/// leaves are never cut and may exceed the limit when their path is long.
pub fn split_json(document_text: &str, max_chunk_chars: usize) -> Result<Vec<String>, ChunkError> {
    let value: Value = serde_json::from_str(document_text).map_err(|e| ChunkError::MalformedJson(e.to_string()))?;
    let mut out = Vec::new();
    let mut path = Vec::new();
    split_node(&mut path, &value, max_chunk_chars.max(1), &mut out);
    Ok(out)
}

fn compact(v: &Value) -> String {
    serde_json::to_string(v).expect("json values always serialize")
}

fn size(v: &Value) -> usize {
    char_len(&compact(v))
}

fn wrap(path: &[PathStep], inner: Value) -> Value {
    path.iter().rev().fold(inner, |acc, step| match step {
        PathStep::Key(k) => {
            let mut m = Map::with_capacity(1);
            m.insert(k.clone(), acc);
            Value::Object(m)
        }
        PathStep::Elem => Value::Array(vec![acc]),
    })
}

/// Characters added by wrapping a value in `path`.
fn overhead(path: &[PathStep]) -> usize {
    path.iter()
        .map(|s| match s {
            PathStep::Key(k) => size(&Value::String(k.clone())) + 3,
            PathStep::Elem => 2,
        })
        .sum()
}

fn split_node(path: &mut Vec<PathStep>, v: &Value, max: usize, out: &mut Vec<String>) {
    let over = overhead(path);
    if over + size(v) <= max {
        out.push(compact(&wrap(path, v.clone())));
        return;
    }
    match v {
        Value::Object(m) if !m.is_empty() => {
            let entries = m.iter().map(|(k, c)| {
                let len = size(&Value::String(k.clone())) + 1 + size(c);
                ((k, c), len)
            });
            group(path, entries, over, max, out, |path, (k, c), max, out| {
                path.push(PathStep::Key(k.clone()));
                split_node(path, c, max, out);
                path.pop();
            }, |items| Value::Object(items.into_iter().map(|(k, c)| (k.clone(), c.clone())).collect()));
        }
        Value::Array(a) if !a.is_empty() => {
            let entries = a.iter().map(|c| (c, size(c)));
            group(path, entries, over, max, out, |path, c, max, out| {
                path.push(PathStep::Elem);
                split_node(path, c, max, out);
                path.pop();
            }, |items| Value::Array(items.into_iter().cloned().collect()));
        }
        Value::String(s) => {
            let avail = max.saturating_sub(over + 2).max(1);
            let mut pieces = Vec::new();
            split_string(s, avail, &mut pieces);
            for p in pieces {
                out.push(compact(&wrap(path, Value::String(p))));
            }
        }
        // Scalars and empty containers are atomic.
        _ => out.push(compact(&wrap(path, v.clone()))),
    }
}

/// Greedily packs consecutive children into containers that fit; a child
/// that does not fit even alone is handed to `descend`.
fn group<T: Copy>(
    path: &mut Vec<PathStep>,
    entries: impl Iterator<Item = (T, usize)>,
    over: usize,
    max: usize,
    out: &mut Vec<String>,
    mut descend: impl FnMut(&mut Vec<PathStep>, T, usize, &mut Vec<String>),
    build: impl Fn(Vec<T>) -> Value,
) {
    let mut cur: Vec<T> = Vec::new();
    let mut cur_len = 0;
    let flush = |cur: &mut Vec<T>, cur_len: &mut usize, path: &[PathStep], out: &mut Vec<String>| {
        if !cur.is_empty() {
            out.push(compact(&wrap(path, build(std::mem::take(cur)))));
            *cur_len = 0;
        }
    };
    for (item, len) in entries {
        let sep = usize::from(!cur.is_empty());
        if over + 2 + cur_len + sep + len <= max {
            cur.push(item);
            cur_len += sep + len;
            continue;
        }
        flush(&mut cur, &mut cur_len, path, out);
        if over + 2 + len <= max {
            cur.push(item);
            cur_len = len;
        } else {
            descend(path, item, max, out);
        }
    }
    flush(&mut cur, &mut cur_len, path, out);
}

/// Cuts `s` into pieces whose escaped JSON form fits in `avail` characters
/// (a lone character that still does not fit is emitted anyway).
fn split_string(s: &str, avail: usize, out: &mut Vec<String>) {
    let escaped = size(&Value::String(s.to_owned())) - 2;
    let n = char_len(s);
    if escaped <= avail || n <= 1 {
        out.push(s.to_owned());
        return;
    }
    let budget = (n * avail / escaped).clamp(1, n - 1);
    for piece in split_plain(s, budget, 0).expect("budget is positive") {
        split_string(&piece, avail, out);
    }
}

/// Every leaf of `v` as a key path, in document order. Empty objects and
/// arrays count as leaves.
pub fn leaf_paths(v: &Value) -> Vec<Vec<PathStep>> {
    fn walk(v: &Value, path: &mut Vec<PathStep>, out: &mut Vec<Vec<PathStep>>) {
        match v {
            Value::Object(m) if !m.is_empty() => {
                for (k, c) in m {
                    path.push(PathStep::Key(k.clone()));
                    walk(c, path, out);
                    path.pop();
                }
            }
            Value::Array(a) if !a.is_empty() => {
                for c in a {
                    path.push(PathStep::Elem);
                    walk(c, path, out);
                    path.pop();
                }
            }
            _ => out.push(path.clone()),
        }
    }
    let mut out = Vec::new();
    walk(v, &mut Vec::new(), &mut out);
    out
}
