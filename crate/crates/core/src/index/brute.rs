use std::collections::HashSet;

use super::{neighbor_order, HnswIndex, IndexError, Neighbor};
use crate::ids::RecordId;
use crate::scalar::{dot, normalize, Scalar};

/// Exact filtered top-`k` by scanning every live row of `index`.
///
/// Shares nothing with the graph search except the stored vectors, so it can
/// serve as the reference for recall and filter-soundness checks.
pub fn brute_force_knn<S: Scalar>(
    index: &HnswIndex<S>,
    query: &[S],
    k: usize,
    allowed: &HashSet<RecordId>,
) -> Result<Vec<Neighbor<S>>, IndexError> {
    if query.len() != index.dim() {
        return Err(IndexError::DimensionMismatch { expected: index.dim(), actual: query.len() });
    }
    let mut q = query.to_vec();
    if !normalize(&mut q) {
        return Err(IndexError::InvalidVector);
    }
    let mut all: Vec<Neighbor<S>> = index
        .rows_with_vectors()
        .filter(|(row, _)| allowed.contains(&row.record_id))
        .map(|(row, v)| Neighbor { id: row.id, record_id: row.record_id, score: dot(&q, v) })
        .collect();
    all.sort_by(neighbor_order);
    all.truncate(k);
    Ok(all)
}
