//! Filtered k-NN latency as the corpus grows.

use std::collections::HashSet;
use std::hint::black_box;
use std::time::Instant;

use aclrag::index::{brute_force_knn, ChunkRow, HnswParams};
use aclrag::repository::{Capability, NewRecord, Repository};
use aclrag::{ChunkId, RecordId, UserId, VectorIndex};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use tracing::info;

use crate::corpus::CorpusStream;
use crate::fit::{fit_linear, fit_logarithmic, Fit};
use crate::{check_memory, BenchConfig, BenchError, BenchResult, RecordMode};

const OWNER: &str = "owner";
const READER: &str = "reader";

/// One measured (N, fraction, record mode) combination.
#[derive(Debug, Clone, Serialize)]
pub struct LatencyPoint {
    pub n: usize,
    pub fraction: f64,
    pub record_mode: String,
    pub records: usize,
    pub accessible_records: usize,
    pub accessible_vectors: usize,
    pub trials: usize,
    pub mean_ms: f64,
    pub std_ms: f64,
    pub oracle_checks: usize,
    /// Mean recall of the checked trials against brute force.
    pub oracle_recall: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveFit {
    pub record_mode: String,
    pub fraction: f64,
    pub fit: Fit,
}

/// An index that is grown in place from a seeded corpus stream. Vector `i`
/// becomes chunk `i + 1`.
pub struct GrowingIndex {
    index: VectorIndex,
    stream: CorpusStream,
}

impl GrowingIndex {
    pub fn new(dim: usize, params: HnswParams, seed: u64) -> Result<Self, BenchError> {
        Ok(Self { index: VectorIndex::new(dim, params)?, stream: CorpusStream::new(dim, seed) })
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn grow_to(&mut self, n: usize) -> Result<(), BenchError> {
        check_memory(n, self.stream.dim())?;
        let start = Instant::now();
        let from = self.index.len();
        while self.index.len() < n {
            let i = self.index.len() as u64;
            let embedding = self.stream.next().expect("stream is endless");
            self.index.insert(ChunkRow {
                id: ChunkId(i + 1),
                record_id: RecordId(0),
                from_metadata: false,
                file_name: None,
                embedding,
                text: String::new(),
            })?;
        }
        if n > from {
            info!(from, to = n, secs = start.elapsed().as_secs_f64(), "index grown");
        }
        Ok(())
    }

    pub fn index(&self) -> &VectorIndex {
        &self.index
    }

    pub fn index_mut(&mut self) -> &mut VectorIndex {
        &mut self.index
    }
}

/// A repository whose records partition the index under `mode`, with a
/// reader granted the `fraction` share.
pub struct AccessLayout {
    pub repo: Repository,
    pub reader: UserId,
    pub records: usize,
    pub accessible_records: usize,
    pub accessible_vectors: usize,
}

/// Relabels `index` to the records of `mode` and builds the matching grants.
pub fn apply_layout(
    index: &mut VectorIndex,
    mode: RecordMode,
    fraction: f64,
    seed: u64,
) -> Result<AccessLayout, BenchError> {
    let n = index.len();
    let repo = Repository::default();
    let owner = UserId::new(OWNER);
    let reader = UserId::new(READER);
    repo.add_user(owner.clone(), "Owner", "owner-token")?;
    repo.add_user(reader.clone(), "Reader", "reader-token")?;

    let (record_count, per_record) = match mode {
        RecordMode::FixedTwo => (2, 0),
        RecordMode::VectorsPerRecord(v) => (n.div_ceil(v).max(1), v),
    };
    let mut ids = Vec::with_capacity(record_count);
    for j in 0..record_count {
        let new = NewRecord {
            identifier: format!("bench-{j}"),
            title: format!("Bench record {j}"),
            ..NewRecord::default()
        };
        ids.push(repo.create_record(new, &owner)?.record_id);
    }

    let (accessible, split): (Vec<usize>, usize) = match mode {
        RecordMode::FixedTwo => (vec![0], (fraction * n as f64).round() as usize),
        RecordMode::VectorsPerRecord(_) => {
            let m = ((fraction * record_count as f64).round() as usize).clamp(1, record_count);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (sample(&mut rng, record_count, m).into_vec(), 0)
        }
    };
    for &j in &accessible {
        repo.grant(ids[j], &reader, Capability::Read, &owner)?;
    }

    let record_of = |vector: usize| match mode {
        RecordMode::FixedTwo => usize::from(vector >= split),
        RecordMode::VectorsPerRecord(_) => vector / per_record,
    };
    index.reassign_records(|row| ids[record_of(row.id.0 as usize - 1)]);

    let open: HashSet<usize> = accessible.iter().copied().collect();
    let accessible_vectors = (0..n).filter(|&i| open.contains(&record_of(i))).count();
    Ok(AccessLayout {
        repo,
        reader,
        records: record_count,
        accessible_records: accessible.len(),
        accessible_vectors,
    })
}

/// Seed for the queries and grants of one (N, fraction) cell, shared by all
/// record modes so they see the same queries.
fn cell_seed(seed: u64, n: usize, fraction: f64) -> u64 {
    seed ^ (n as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ fraction.to_bits().rotate_left(17)
}

/// Times `trials` searches through the production path: fetch the reader's
/// readable record ids, then run the filtered graph search.
pub fn measure_point(
    index: &mut VectorIndex,
    mode: RecordMode,
    fraction: f64,
    k: usize,
    trials: usize,
    oracle_rate: f64,
    seed: u64,
) -> Result<LatencyPoint, BenchError> {
    let n = index.len();
    let cell = cell_seed(seed, n, fraction);
    let layout = apply_layout(index, mode, fraction, cell)?;
    let index = &*index;
    let queries: Vec<Vec<f32>> = CorpusStream::new(index.dim(), cell ^ 0x51_7cc1_b727_220a).take(trials).collect();

    let checks = (trials as f64 * oracle_rate).ceil() as usize;
    let every = if checks == 0 { usize::MAX } else { trials.div_ceil(checks) };

    // Untimed warm-up so the first trial does not pay for cold caches.
    let allowed = layout.repo.accessible_record_ids(&layout.reader)?;
    black_box(index.knn_filtered(&queries[0], k, &allowed)?);

    let mut samples = Vec::with_capacity(trials);
    let mut recalls = Vec::new();
    for (t, q) in queries.iter().enumerate() {
        let start = Instant::now();
        let allowed = layout.repo.accessible_record_ids(&layout.reader)?;
        let found = index.knn_filtered(q, k, &allowed)?;
        let elapsed = start.elapsed();
        black_box(&found);
        samples.push(elapsed.as_secs_f64() * 1e3);

        if let Some(leak) = found.iter().find(|h| !allowed.contains(&h.record_id)) {
            return Err(BenchError::FilterViolation { n, fraction, chunk: leak.id });
        }
        if t % every == 0 {
            let exact = brute_force_knn(index, q, k, &allowed)?;
            let truth: HashSet<ChunkId> = exact.iter().map(|h| h.id).collect();
            let hits = found.iter().filter(|h| truth.contains(&h.id)).count();
            recalls.push(if truth.is_empty() { 1.0 } else { hits as f64 / truth.len() as f64 });
        }
    }

    let mean = samples.iter().sum::<f64>() / trials as f64;
    let var = if trials > 1 {
        samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (trials - 1) as f64
    } else {
        0.0
    };
    let point = LatencyPoint {
        n,
        fraction,
        record_mode: mode.to_string(),
        records: layout.records,
        accessible_records: layout.accessible_records,
        accessible_vectors: layout.accessible_vectors,
        trials,
        mean_ms: mean,
        std_ms: var.sqrt(),
        oracle_checks: recalls.len(),
        oracle_recall: (!recalls.is_empty()).then(|| recalls.iter().sum::<f64>() / recalls.len() as f64),
    };
    info!(n, fraction, mode = %mode, mean_ms = point.mean_ms, recall = ?point.oracle_recall, "measured");
    Ok(point)
}

/// Fits one curve per (mode, fraction): logarithmic for two fixed records,
/// linear when the record count grows with the corpus.
pub fn fit_curves(points: &[LatencyPoint]) -> Vec<CurveFit> {
    let mut keys: Vec<(String, f64)> = Vec::new();
    for p in points {
        if !keys.iter().any(|(m, f)| *m == p.record_mode && *f == p.fraction) {
            keys.push((p.record_mode.clone(), p.fraction));
        }
    }
    keys.into_iter()
        .filter_map(|(mode, fraction)| {
            let (xs, ys): (Vec<f64>, Vec<f64>) = points
                .iter()
                .filter(|p| p.record_mode == mode && p.fraction == fraction)
                .map(|p| (p.n as f64, p.mean_ms))
                .unzip();
            let fit = if mode == RecordMode::FixedTwo.to_string() {
                fit_logarithmic(&xs, &ys)
            } else {
                fit_linear(&xs, &ys)
            }?;
            Some(CurveFit { record_mode: mode, fraction, fit })
        })
        .collect()
}

/// Runs every mode in `modes` against one incrementally grown index.
pub fn run_latency_sweep(cfg: &BenchConfig, modes: &[RecordMode]) -> Result<BenchResult, BenchError> {
    cfg.validate()?;
    for m in modes {
        BenchConfig { record_mode: *m, ..cfg.clone() }.validate()?;
    }
    check_memory(*cfg.checkpoints.last().unwrap(), cfg.dim)?;
    let mut grow = GrowingIndex::new(cfg.dim, cfg.params, cfg.seed)?;
    let mut latency = Vec::new();
    for &n in &cfg.checkpoints {
        grow.grow_to(n)?;
        for &fraction in &cfg.access_fractions {
            for &mode in modes {
                latency.push(measure_point(
                    grow.index_mut(),
                    mode,
                    fraction,
                    cfg.k,
                    cfg.trials,
                    cfg.oracle_rate,
                    cfg.seed,
                )?);
            }
        }
    }
    let latency_fits = fit_curves(&latency);
    Ok(BenchResult { latency, latency_fits, ..BenchResult::default() })
}

pub fn run_latency_experiment(cfg: &BenchConfig) -> Result<BenchResult, BenchError> {
    run_latency_sweep(cfg, &[cfg.record_mode])
}
