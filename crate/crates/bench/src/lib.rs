//! Scaling experiments for access-filtered k-NN search.
//!
//! A seeded stream of unit vectors is inserted into one HNSW index that
//! grows through a list of checkpoints. At each checkpoint the vectors are
//! relabeled into repository records ([`RecordMode`]), a reader is granted a
//! share of them, and searches are timed end to end: fetching the reader's
//! readable record ids plus the filtered graph search. Memory is read from
//! the index's own byte accounting.

mod config;
mod corpus;
pub mod fit;
mod latency;
mod memory;

use std::io::Write;
use std::path::Path;

use aclrag::index::IndexError;
use aclrag::repository::RepoError;
use aclrag::ChunkId;
use serde::Serialize;
use thiserror::Error;

pub use config::{default_checkpoints, BenchConfig, RecordMode, DEFAULT_N_MAX, FULL_N_MAX};
pub use corpus::{generate_corpus, CorpusStream};
pub use fit::{Fit, FitKind};
pub use latency::{
    apply_layout, fit_curves, measure_point, run_latency_experiment, run_latency_sweep, AccessLayout, CurveFit,
    GrowingIndex, LatencyPoint,
};
pub use memory::{
    fit_memory, memory_point, run_memory_experiment, MemoryConfig, MemoryFits, MemoryPoint,
    REFERENCE_INDEX_KB_PER_VECTOR, REFERENCE_TOTAL_KB_PER_VECTOR,
};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("corpus of {n} vectors needs about {required} bytes, {available} available")]
    OutOfMemory { n: usize, required: u64, available: u64 },
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Repository(#[from] RepoError),
    #[error("chunk {chunk} of an unreadable record returned at N={n}, fraction {fraction}")]
    FilterViolation { n: usize, fraction: f64, chunk: ChunkId },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Default)]
pub struct BenchResult {
    pub latency: Vec<LatencyPoint>,
    pub latency_fits: Vec<CurveFit>,
    pub memory: Vec<MemoryPoint>,
    pub memory_fits: Option<MemoryFits>,
}

/// Rough resident size of an index holding `n` vectors of `dim` floats.
pub fn estimated_bytes(n: usize, dim: usize) -> u64 {
    n as u64 * (dim as u64 * 4 + 512)
}

fn available_memory() -> Option<u64> {
    let info = std::fs::read_to_string("/proc/meminfo").ok()?;
    let line = info.lines().find(|l| l.starts_with("MemAvailable:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

/// Fails with [`BenchError::OutOfMemory`] when the estimate for `n` vectors
/// exceeds the memory the system reports as available. Without a report the
/// check passes.
pub fn check_memory(n: usize, dim: usize) -> Result<(), BenchError> {
    let required = estimated_bytes(n, dim);
    match available_memory() {
        Some(available) if required > available => Err(BenchError::OutOfMemory { n, required, available }),
        _ => Ok(()),
    }
}

fn write_rows<T: Serialize>(rows: &[T], out: impl Write) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns: n, fraction, record_mode, records, accessible_records,
/// accessible_vectors, trials, mean_ms, std_ms, oracle_checks, oracle_recall.
pub fn write_latency_csv(points: &[LatencyPoint], path: impl AsRef<Path>) -> Result<(), BenchError> {
    write_rows(points, std::fs::File::create(path)?)
}

/// Columns: n, graph_bytes, rows_bytes, total_bytes, graph_kb_per_vector,
/// total_kb_per_vector.
pub fn write_memory_csv(points: &[MemoryPoint], path: impl AsRef<Path>) -> Result<(), BenchError> {
    write_rows(points, std::fs::File::create(path)?)
}
