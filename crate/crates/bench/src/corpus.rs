//! Random unit vectors, uniform in direction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Endless stream of unit vectors: isotropic Gaussian samples, normalized.
///
/// Normalization is done in `f64` before narrowing so every norm lands
/// within float rounding of one.
pub struct CorpusStream {
    rng: ChaCha8Rng,
    dim: usize,
}

impl CorpusStream {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Self { rng: ChaCha8Rng::seed_from_u64(seed), dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

impl Iterator for CorpusStream {
    type Item = Vec<f32>;

    fn next(&mut self) -> Option<Vec<f32>> {
        loop {
            let raw: Vec<f64> = (0..self.dim).map(|_| self.rng.sample(StandardNormal)).collect();
            let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                return Some(raw.into_iter().map(|x| (x / norm) as f32).collect());
            }
        }
    }
}

/// `n` unit vectors of dimension `dim`, reproducible under `seed`.
pub fn generate_corpus(n: usize, dim: usize, seed: u64) -> Vec<Vec<f32>> {
    CorpusStream::new(dim, seed).take(n).collect()
}
