use std::fmt;
use std::str::FromStr;

use aclrag::index::HnswParams;

use crate::BenchError;

/// How vectors are grouped into repository records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RecordMode {
    /// Two records regardless of corpus size: one readable, one not. The
    /// access fraction decides how many vectors the readable one holds.
    FixedTwo,
    /// Every `v` consecutive vectors form one record, so the record count
    /// grows linearly with the corpus.
    VectorsPerRecord(usize),
}

impl fmt::Display for RecordMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RecordMode::FixedTwo => f.write_str("fixed_two"),
            RecordMode::VectorsPerRecord(v) => write!(f, "vectors_per_record={v}"),
        }
    }
}

impl FromStr for RecordMode {
    type Err = BenchError;

    /// Accepts `fixed_two`, `vectors_per_record=V` or a bare `V`.
    fn from_str(s: &str) -> Result<Self, BenchError> {
        let s = s.trim();
        if s == "fixed_two" {
            return Ok(RecordMode::FixedTwo);
        }
        let v = s.strip_prefix("vectors_per_record=").unwrap_or(s);
        match v.parse::<usize>() {
            Ok(v) if v > 0 => Ok(RecordMode::VectorsPerRecord(v)),
            _ => Err(BenchError::InvalidConfig(format!("unknown record mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub n_max: usize,
    /// Corpus sizes at which latency is measured, ascending.
    pub checkpoints: Vec<usize>,
    pub dim: usize,
    pub k: usize,
    pub access_fractions: Vec<f64>,
    pub record_mode: RecordMode,
    pub trials: usize,
    pub seed: u64,
    pub params: HnswParams,
    /// Share of trials whose result is re-checked against brute force.
    pub oracle_rate: f64,
}

pub const DEFAULT_N_MAX: usize = 200_000;
pub const FULL_N_MAX: usize = 1_000_000;

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            n_max: DEFAULT_N_MAX,
            checkpoints: default_checkpoints(DEFAULT_N_MAX),
            dim: 1024,
            k: 50,
            access_fractions: vec![0.01, 0.1, 1.0],
            record_mode: RecordMode::FixedTwo,
            trials: 100,
            seed: 42,
            params: HnswParams::default(),
            oracle_rate: 0.01,
        }
    }
}

/// The 1, 5, 10, 50, ... series from 1000 up to `n_max`, always ending at
/// `n_max`. For 200k this is {1k, 5k, 10k, 50k, 100k, 200k}.
pub fn default_checkpoints(n_max: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut decade = 1000usize;
    'outer: loop {
        for step in [1, 5] {
            let n = decade * step;
            if n >= n_max {
                break 'outer;
            }
            out.push(n);
        }
        decade *= 10;
    }
    out.push(n_max);
    out
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::InvalidConfig(m));
        if self.n_max == 0 || self.dim == 0 || self.k == 0 || self.trials == 0 {
            return bad("n_max, dim, k and trials must be positive".into());
        }
        if self.checkpoints.is_empty() || self.checkpoints[0] == 0 {
            return bad("checkpoints must be non-empty and positive".into());
        }
        if self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return bad("checkpoints must be strictly ascending".into());
        }
        if *self.checkpoints.last().unwrap() > self.n_max {
            return bad(format!("checkpoint above n_max {}", self.n_max));
        }
        if self.access_fractions.is_empty() {
            return bad("at least one access fraction is required".into());
        }
        if let Some(f) = self.access_fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
            return bad(format!("access fraction {f} outside (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.oracle_rate) {
            return bad(format!("oracle rate {} outside [0, 1]", self.oracle_rate));
        }
        if self.record_mode == RecordMode::VectorsPerRecord(0) {
            return bad("vectors_per_record must be positive".into());
        }
        self.params.validate()?;
        Ok(())
    }
}
