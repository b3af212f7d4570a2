mod common;

use std::collections::{BTreeMap, HashSet};

use aclrag::index::{brute_force_knn, HnswParams, IndexError};
use aclrag::{ChunkId, RecordId, VectorIndex, VectorIndexF64};
use common::*;
use proptest::prelude::*;

fn all(records: impl IntoIterator<Item = u64>) -> HashSet<RecordId> {
    records.into_iter().map(RecordId).collect()
}

#[test]
fn self_query_ranks_first() {
    let vs = unit_vectors(500, 64, 1);
    let idx = build(&vs, HnswParams::default(), |i| i as u64 % 5);
    let allowed = all(0..5);
    for i in [0, 17, 499] {
        let hits = idx.knn_filtered(&vs[i], 5, &allowed).unwrap();
        assert_eq!(hits[0].id, ChunkId(i as u64 + 1));
        assert!((hits[0].score - 1.0).abs() < 1e-5);
    }
}

#[test]
fn dimension_mismatch_on_insert_and_query() {
    let mut idx = VectorIndex::new(1024, HnswParams::default()).unwrap();
    let err = idx.insert(row(1, 1, vec![1.0; 512])).unwrap_err();
    assert!(matches!(err, IndexError::DimensionMismatch { expected: 1024, actual: 512 }));
    let err = idx.knn_filtered(&[1.0; 3], 1, &all([1])).unwrap_err();
    assert!(matches!(err, IndexError::DimensionMismatch { .. }));
    assert!(brute_force_knn(&idx, &[1.0; 3], 1, &all([1])).is_err());
}

#[test]
fn duplicate_id_rejected() {
    let mut idx = VectorIndex::new(4, HnswParams::default()).unwrap();
    idx.insert(row(1, 1, vec![1.0, 0.0, 0.0, 0.0])).unwrap();
    assert!(matches!(idx.insert(row(1, 2, vec![0.0, 1.0, 0.0, 0.0])), Err(IndexError::DuplicateId(_))));
}

#[test]
fn small_m_rejected() {
    let p = HnswParams { m: 1, ..HnswParams::default() };
    assert!(matches!(VectorIndex::new(8, p), Err(IndexError::InvalidParams(_))));
}

#[test]
fn empty_allowed_set_returns_nothing() {
    let vs = unit_vectors(50, 16, 2);
    let idx = build(&vs, HnswParams::default(), |_| 1);
    assert!(idx.knn_filtered(&vs[0], 10, &HashSet::new()).unwrap().is_empty());
}

#[test]
fn single_accessible_vector_is_found() {
    let vs = unit_vectors(2000, 32, 3);
    let idx = build(&vs, HnswParams::default(), |i| if i == 1234 { 9 } else { 1 });
    let q = &unit_vectors(1, 32, 99)[0];
    let hits = idx.knn_filtered(q, 10, &all([9])).unwrap();
    assert_eq!(ids(&hits), vec![ChunkId(1235)]);
}

#[test]
fn ten_thousand_inserts_counted() {
    let vs = unit_vectors(10_000, 16, 4);
    let idx = build(&vs, HnswParams { ef_construction: 32, ..HnswParams::default() }, |_| 1);
    assert_eq!(idx.len(), 10_000);
}

#[test]
fn delete_by_record_removes_everything() {
    let vs = unit_vectors(20, 8, 5);
    let idx_records = |i: usize| if i < 5 { 7 } else { 1 };
    let mut idx = build(&vs, HnswParams::default(), idx_records);
    assert_eq!(idx.delete_by_record(RecordId(42)), 0);
    assert_eq!(idx.delete_by_record(RecordId(7)), 5);
    assert!(idx.knn_filtered(&vs[0], 10, &all([7])).unwrap().is_empty());
    assert_eq!(idx.len(), 15);
}

#[test]
fn identical_vectors_order_by_id() {
    let mut idx = VectorIndex::new(3, HnswParams::default()).unwrap();
    let v = vec![0.0, 1.0, 0.0];
    for id in [5, 2, 9] {
        idx.insert(row(id, 1, v.clone())).unwrap();
    }
    let allowed = all([1]);
    let exact = brute_force_knn(&idx, &v, 10, &allowed).unwrap();
    assert_eq!(ids(&exact), vec![ChunkId(2), ChunkId(5), ChunkId(9)]);
    assert_eq!(ids(&idx.knn_filtered(&v, 10, &allowed).unwrap()), ids(&exact));
}

#[test]
fn brute_force_returns_all_when_few_allowed() {
    let vs = unit_vectors(100, 8, 6);
    let idx = build(&vs, HnswParams::default(), |i| i as u64);
    let hits = brute_force_knn(&idx, &vs[0], 50, &all([3, 4, 5])).unwrap();
    assert_eq!(hits.len(), 3);
    assert!(hits.windows(2).all(|w| w[0].score >= w[1].score));
}

#[test]
fn exhaustive_ef_matches_brute_force() {
    let vs = unit_vectors(300, 16, 7);
    let idx = build(&vs, HnswParams { ef_search: 300, ..HnswParams::default() }, |i| i as u64 % 3);
    let queries = unit_vectors(20, 16, 8);
    let allowed = all([0, 2]);
    for q in &queries {
        let a = idx.knn_filtered(q, 10, &allowed).unwrap();
        let b = brute_force_knn(&idx, q, 10, &allowed).unwrap();
        assert_eq!(ids(&a), ids(&b));
    }
}

#[test]
fn builds_are_deterministic() {
    let vs = unit_vectors(1500, 32, 9);
    let a = build(&vs, HnswParams::default(), |i| i as u64 % 10);
    let b = build(&vs, HnswParams::default(), |i| i as u64 % 10);
    assert_eq!(a.to_snapshot_bytes(), b.to_snapshot_bytes());
    let allowed = all([1, 2, 3]);
    for q in &unit_vectors(20, 32, 10) {
        assert_eq!(a.knn_filtered(q, 10, &allowed).unwrap(), b.knn_filtered(q, 10, &allowed).unwrap());
    }
}

#[test]
fn recall_rises_with_ef() {
    let vs = unit_vectors(3000, 128, 11);
    let mut idx = build(&vs, HnswParams::default(), |i| i as u64 % 10);
    let queries = unit_vectors(100, 128, 12);
    let allowed = all(0..10);
    let mut prev = 0.0;
    for ef in [10, 40, 160, 640] {
        idx.set_ef_search(ef);
        let mut hit = 0;
        for q in &queries {
            let exact = brute_force_knn(&idx, q, 10, &allowed).unwrap();
            hit += overlap(&exact, &idx.knn_filtered(q, 10, &allowed).unwrap());
        }
        let recall = hit as f64 / (10 * queries.len()) as f64;
        assert!(recall + 1e-9 >= prev, "ef {ef}: recall {recall} below {prev}");
        prev = recall;
    }
    assert!(prev > 0.95);
}

#[test]
fn filtered_recall_on_moderate_index() {
    let vs = unit_vectors(5000, 64, 13);
    let idx = build(&vs, HnswParams::default(), |i| i as u64 % 100);
    let queries = unit_vectors(50, 64, 14);
    for fraction in [1usize, 10, 100] {
        let allowed = all(0..fraction as u64);
        let mut hit = 0;
        for q in &queries {
            let exact = brute_force_knn(&idx, q, 50, &allowed).unwrap();
            hit += overlap(&exact, &idx.knn_filtered(q, 50, &allowed).unwrap());
        }
        let recall = hit as f64 / (50 * queries.len()) as f64;
        assert!(recall >= 0.9, "{fraction} records allowed: recall {recall}");
    }
}

#[test]
fn snapshot_round_trip_and_corruption() {
    let vs = unit_vectors(800, 24, 15);
    let mut idx = build(&vs, HnswParams::default(), |i| i as u64 % 4);
    idx.delete_by_record(RecordId(3));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("index.snap");
    idx.snapshot(&path).unwrap();
    let back = VectorIndex::restore(&path).unwrap();
    let allowed = all(0..4);
    for q in &unit_vectors(30, 24, 16) {
        assert_eq!(idx.knn_filtered(q, 10, &allowed).unwrap(), back.knn_filtered(q, 10, &allowed).unwrap());
    }
    assert_eq!(back.len(), idx.len());

    let mut bytes = std::fs::read(&path).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0xff;
    assert!(matches!(VectorIndex::from_snapshot_bytes(&bytes), Err(IndexError::CorruptSnapshot(_))));
    assert!(matches!(VectorIndex::restore(dir.path().join("missing")), Err(IndexError::IoFailure(_))));
}

#[test]
fn inserts_after_restore_match_uninterrupted_build() {
    let vs = unit_vectors(600, 16, 17);
    let full = build(&vs, HnswParams::default(), |_| 1);
    let half = build(&vs[..300], HnswParams::default(), |_| 1);
    let mut resumed = VectorIndex::from_snapshot_bytes(&half.to_snapshot_bytes()).unwrap();
    for (i, v) in vs.iter().enumerate().skip(300) {
        resumed.insert(row(i as u64 + 1, 1, v.clone())).unwrap();
    }
    assert_eq!(resumed.to_snapshot_bytes(), full.to_snapshot_bytes());
}

#[test]
fn memory_report_accounting() {
    let empty = VectorIndex::new(1024, HnswParams::default()).unwrap();
    let r = empty.memory_report();
    assert_eq!(r.vector_count, 0);
    assert!(r.graph_bytes > 0);
    assert_eq!(r.rows_bytes, 0);
    let vs = unit_vectors(200, 1024, 18);
    let idx = build(&vs, HnswParams::default(), |_| 1);
    let r2 = idx.memory_report();
    assert!(r2.graph_bytes > r.graph_bytes);
    let r = r2;
    assert_eq!(r.vector_count, 200);
    assert_eq!(r.total_bytes, r.graph_bytes + r.rows_bytes);
    assert!(r.rows_bytes >= 4096 * 200);
}

#[test]
fn compaction_keeps_results() {
    let vs = unit_vectors(1000, 16, 19);
    let mut idx = build(&vs, HnswParams { ef_search: 1000, ..HnswParams::default() }, |i| i as u64 % 10);
    for r in 0..4 {
        idx.delete_by_record(RecordId(r));
    }
    // 40% tombstoned: compaction has run.
    assert_eq!(idx.node_count(), idx.len());
    let allowed = all(0..10);
    for q in &unit_vectors(10, 16, 20) {
        let a = idx.knn_filtered(q, 20, &allowed).unwrap();
        let b = brute_force_knn(&idx, q, 20, &allowed).unwrap();
        assert_eq!(ids(&a), ids(&b));
    }
}

#[test]
fn f64_index_agrees_with_f32() {
    let vs = unit_vectors(300, 16, 21);
    let a = build(&vs, HnswParams::default(), |_| 1);
    let mut b = VectorIndexF64::new(16, HnswParams::default()).unwrap();
    for (i, v) in vs.iter().enumerate() {
        let mut r = aclrag::index::ChunkRow {
            id: ChunkId(i as u64 + 1),
            record_id: RecordId(1),
            from_metadata: true,
            file_name: None,
            embedding: v.iter().map(|&x| x as f64).collect(),
            text: String::new(),
        };
        r.text = format!("chunk {}", i + 1);
        b.insert(r).unwrap();
    }
    let q = &vs[5];
    let q64: Vec<f64> = q.iter().map(|&x| x as f64).collect();
    let allowed = all([1]);
    assert_eq!(ids(&a.knn_filtered(q, 5, &allowed).unwrap())[0], ids(&b.knn_filtered(&q64, 5, &allowed).unwrap())[0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn filter_soundness(seed in any::<u64>(), n in 1usize..400, records in 1u64..30, mask in any::<u32>(), k in 1usize..40) {
        let vs = unit_vectors(n, 12, seed);
        let idx = build(&vs, HnswParams { ef_construction: 32, ..HnswParams::default() }, |i| (i as u64 * 7919) % records);
        let allowed: HashSet<RecordId> = (0..records).filter(|r| mask >> (r % 32) & 1 == 1).map(RecordId).collect();
        let q = &unit_vectors(1, 12, seed ^ 1)[0];
        let hits = idx.knn_filtered(q, k, &allowed).unwrap();
        prop_assert!(hits.len() <= k);
        prop_assert!(hits.iter().all(|h| allowed.contains(&h.record_id)));
        prop_assert!(hits.windows(2).all(|w| w[0].score > w[1].score || (w[0].score == w[1].score && w[0].id < w[1].id)));
    }

    #[test]
    fn interleaved_updates_match_shadow(ops in prop::collection::vec((any::<bool>(), 0u64..12), 1..120), seed in any::<u64>()) {
        let dim = 8;
        let mut idx = VectorIndex::new(dim, HnswParams { ef_search: 400, ..HnswParams::default() }).unwrap();
        let mut shadow: BTreeMap<ChunkId, RecordId> = BTreeMap::new();
        let vs = unit_vectors(ops.len(), dim, seed);
        for (i, (insert, record)) in ops.iter().enumerate() {
            if *insert {
                idx.insert(row(i as u64 + 1, *record, vs[i].clone())).unwrap();
                shadow.insert(ChunkId(i as u64 + 1), RecordId(*record));
            } else {
                let removed = idx.delete_by_record(RecordId(*record));
                let before = shadow.len();
                shadow.retain(|_, r| *r != RecordId(*record));
                prop_assert_eq!(removed, before - shadow.len());
            }
        }
        let live: BTreeMap<ChunkId, RecordId> = idx.rows().map(|r| (r.id, r.record_id)).collect();
        prop_assert_eq!(&live, &shadow);
        let allowed: HashSet<RecordId> = (0..12).map(RecordId).collect();
        let hits = idx.knn_filtered(&vs[0], 400, &allowed).unwrap();
        let found: BTreeMap<ChunkId, RecordId> = hits.iter().map(|h| (h.id, h.record_id)).collect();
        prop_assert_eq!(found, shadow);
    }
}
