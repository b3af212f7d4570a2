//! Floating-point element types accepted by the vector index.
//!
//! Everything that touches raw vector math is generic over [`Scalar`], so the
//! index can run on `f32` (the production layout) or `f64` (handy for
//! numerically sensitive tests) without duplicating code.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Element type of an embedding vector.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Default + Debug + Display + Send + Sync + 'static
{
    /// Width of one element in the snapshot format.
    const BYTES: usize;

    fn write_le(self, out: &mut Vec<u8>);

    /// Reads one element from the first `Self::BYTES` bytes of `bytes`.
    fn read_le(bytes: &[u8]) -> Self;
}

impl Scalar for f32 {
    const BYTES: usize = 4;

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        let mut raw = [0u8; 4];
        raw.copy_from_slice(&bytes[..4]);
        f32::from_le_bytes(raw)
    }
}

impl Scalar for f64 {
    const BYTES: usize = 8;

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        let mut raw = [0u8; 8];
        raw.copy_from_slice(&bytes[..8]);
        f64::from_le_bytes(raw)
    }
}

/// Inner product with eight independent accumulators so the loop vectorizes.
#[inline]
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [S::zero(); 8];
    let chunks_a = a.chunks_exact(8);
    let chunks_b = b.chunks_exact(8);
    let tail_a = chunks_a.remainder();
    let tail_b = chunks_b.remainder();
    for (x, y) in chunks_a.zip(chunks_b) {
        for lane in 0..8 {
            acc[lane] = acc[lane] + x[lane] * y[lane];
        }
    }
    let mut sum = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for (x, y) in tail_a.iter().zip(tail_b) {
        sum = sum + *x * *y;
    }
    sum
}

pub fn l2_norm<S: Scalar>(v: &[S]) -> S {
    dot(v, v).sqrt()
}

/// Scales `v` to unit length. Returns `false` (leaving `v` untouched) when the
/// norm is zero or not finite.
pub fn normalize<S: Scalar>(v: &mut [S]) -> bool {
    let norm = l2_norm(v);
    if !norm.is_finite() || norm <= S::zero() {
        return false;
    }
    for x in v.iter_mut() {
        *x = *x / norm;
    }
    true
}

/// Cosine similarity for arbitrary (not necessarily normalized) vectors.
pub fn cosine<S: Scalar>(a: &[S], b: &[S]) -> S {
    let denom = l2_norm(a) * l2_norm(b);
    if denom <= S::zero() {
        S::zero()
    } else {
        dot(a, b) / denom
    }
}
