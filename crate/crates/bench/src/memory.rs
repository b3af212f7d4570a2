//! Bytes per vector of the graph and of the whole vector table.

use aclrag::index::HnswParams;
use serde::Serialize;
use tracing::info;

use crate::fit::{fit_linear_nonneg_intercept, Fit};
use crate::latency::GrowingIndex;
use crate::{BenchError, BenchResult};

/// Reference figures for a pgvector deployment, in kB per vector.
pub const REFERENCE_INDEX_KB_PER_VECTOR: f64 = 7.5;
pub const REFERENCE_TOTAL_KB_PER_VECTOR: f64 = 13.7;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MemoryPoint {
    pub n: usize,
    pub graph_bytes: usize,
    pub rows_bytes: usize,
    pub total_bytes: usize,
    pub graph_kb_per_vector: f64,
    pub total_kb_per_vector: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MemoryFits {
    /// `graph_bytes = a N + b`, `b >= 0`.
    pub graph: Fit,
    pub total: Fit,
}

impl MemoryFits {
    /// Fitted slopes in kB (1000 bytes) per vector: (graph, total).
    pub fn kb_per_vector(&self) -> (f64, f64) {
        (self.graph.a / 1e3, self.total.a / 1e3)
    }
}

#[derive(Debug, Clone)]
pub struct MemoryConfig {
    pub sizes: Vec<usize>,
    pub dim: usize,
    pub params: HnswParams,
    pub seed: u64,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        Self { sizes: vec![10_000, 50_000, 100_000], dim: 1024, params: HnswParams::default(), seed: 42 }
    }
}

pub fn memory_point(grow: &GrowingIndex) -> MemoryPoint {
    let r = grow.index().memory_report();
    let n = r.vector_count;
    MemoryPoint {
        n,
        graph_bytes: r.graph_bytes,
        rows_bytes: r.rows_bytes,
        total_bytes: r.total_bytes,
        graph_kb_per_vector: r.graph_bytes as f64 / n.max(1) as f64 / 1e3,
        total_kb_per_vector: r.total_bytes as f64 / n.max(1) as f64 / 1e3,
    }
}

pub fn fit_memory(points: &[MemoryPoint]) -> Option<MemoryFits> {
    let xs: Vec<f64> = points.iter().map(|p| p.n as f64).collect();
    let g: Vec<f64> = points.iter().map(|p| p.graph_bytes as f64).collect();
    let t: Vec<f64> = points.iter().map(|p| p.total_bytes as f64).collect();
    Some(MemoryFits { graph: fit_linear_nonneg_intercept(&xs, &g)?, total: fit_linear_nonneg_intercept(&xs, &t)? })
}

/// Grows one index through `sizes` and records its byte accounting at each.
pub fn run_memory_experiment(cfg: &MemoryConfig) -> Result<BenchResult, BenchError> {
    if cfg.sizes.is_empty() || cfg.sizes[0] == 0 || cfg.sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(BenchError::InvalidConfig("sizes must be positive and strictly ascending".into()));
    }
    cfg.params.validate()?;
    let mut grow = GrowingIndex::new(cfg.dim, cfg.params, cfg.seed)?;
    let mut memory = Vec::new();
    for &n in &cfg.sizes {
        grow.grow_to(n)?;
        let p = memory_point(&grow);
        info!(n, graph_bytes = p.graph_bytes, total_bytes = p.total_bytes, "memory");
        memory.push(p);
    }
    let memory_fits = fit_memory(&memory);
    Ok(BenchResult { memory, memory_fits, ..BenchResult::default() })
}
