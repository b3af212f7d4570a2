mod common;

use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use aclrag::chunking::ChunkConfig;
use aclrag::fixtures::{grant_all, grant_by, lisa_replica, polis, KADI_PAPER_FILE};
use aclrag::gateway::{Embedder, GatewayError, HashingEmbedder, JaccardReranker, Unavailable};
use aclrag::index::brute_force_knn;
use aclrag::repository::*;
use aclrag::retrieval::*;
use aclrag::{RecordId, UserId};
use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

fn u(s: &str) -> UserId {
    UserId::from(s)
}

/// Exact reference pipeline: brute-force k-NN, Jaccard rerank, sort, cut.
fn reference_search(stack: &Stack, query: &str, k: usize, n: usize, user: &str) -> Vec<(RecordId, String)> {
    let allowed = stack.repo.accessible_record_ids(&u(user)).unwrap();
    let q = stack.embedder.embed_one(query);
    let mut hits: Vec<(f32, f32, u64, RecordId, String)> = stack.table.with_index(|idx| {
        brute_force_knn(idx, &q, k, &allowed)
            .unwrap()
            .into_iter()
            .map(|h| {
                let row = idx.get(h.id).unwrap();
                (JaccardReranker::score(query, &row.text), h.score, h.id.0, h.record_id, row.text.clone())
            })
            .collect()
    });
    hits.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)).then(a.2.cmp(&b.2)));
    hits.into_iter().take(n).map(|h| (h.3, h.4)).collect()
}

fn polis_stack() -> Stack {
    let mut lines = polis();
    grant_all(&mut lines, "alice", Capability::Read);
    stack(lines, &["alice", "bob"])
}

#[test]
fn no_access_means_no_results() {
    let s = polis_stack();
    let r = s.retriever().semantic_search(&SearchParams::new("DFT"), &u("bob")).unwrap();
    assert!(r.results.is_empty());
}

#[test]
fn parameter_errors() {
    let s = polis_stack();
    let r = s.retriever();
    assert!(matches!(r.semantic_search(&SearchParams::new("  "), &u("alice")), Err(SearchError::EmptyQuery)));
    let bad = SearchParams { query: "x".into(), k: 5, n: 6 };
    assert!(matches!(r.semantic_search(&bad, &u("alice")), Err(SearchError::InvalidParams { .. })));
    let zero = SearchParams { query: "x".into(), k: 5, n: 0 };
    assert!(matches!(r.semantic_search(&zero, &u("alice")), Err(SearchError::InvalidParams { .. })));
    assert!(matches!(
        r.semantic_search(&SearchParams::new("x"), &u("nobody")),
        Err(SearchError::Repository(RepoError::UnknownUser(_)))
    ));
}

#[test]
fn embedder_outage_fails_search() {
    let s = polis_stack();
    let mut r = s.retriever();
    r.embedder = Arc::new(Unavailable { dimension: DIM });
    assert!(matches!(r.semantic_search(&SearchParams::new("DFT"), &u("alice")), Err(SearchError::EmbedderUnavailable(_))));
}

#[test]
fn lisa_search_finds_the_paper() {
    let mut lines = lisa_replica();
    grant_all(&mut lines, "alice", Capability::Read);
    let s = stack(lines, &["alice"]);
    let query = "Kadi4Mat: A research data infrastructure for materials science";
    let r = s.retriever().semantic_search(&SearchParams::new(query), &u("alice")).unwrap();
    assert_eq!(r.results.len(), 8);
    assert!(r.results.iter().any(|c| c.file_name.as_deref() == Some(KADI_PAPER_FILE)));
}

#[test]
fn three_accessible_chunks_give_three_results() {
    let repo_lines = vec![
        FixtureLine { identifier: "a".into(), title: "Alpha".into(), ..blank() },
        FixtureLine { identifier: "b".into(), title: "Beta".into(), ..blank() },
        FixtureLine { identifier: "c".into(), title: "Gamma".into(), ..blank() },
        FixtureLine { identifier: "d".into(), title: "Delta".into(), ..blank() },
    ];
    let mut lines = repo_lines;
    grant_by(&mut lines, |pos| if pos <= 3 { vec![("alice".into(), Capability::Read)] } else { vec![] });
    let s = stack(lines, &["alice"]);
    assert_eq!(s.table.len(), 4);
    let got = s.retriever().semantic_search(&SearchParams::new("alpha gamma"), &u("alice")).unwrap();
    assert_eq!(got.results.len(), 3);
    let want = reference_search(&s, "alpha gamma", 50, 8, "alice");
    let got: Vec<_> = got.results.into_iter().map(|c| (c.record_id, c.text)).collect();
    assert_eq!(got, want);
}

fn blank() -> FixtureLine {
    FixtureLine {
        identifier: String::new(),
        title: String::new(),
        description: String::new(),
        extras: Default::default(),
        files: vec![],
        links: vec![],
        grants: vec![],
    }
}

#[test]
fn search_matches_reference_pipeline() {
    let s = polis_stack();
    // Large ef makes the first stage exact on this small table.
    let exact = VectorTable::from_index(s.table.with_index(|idx| {
        let mut c = aclrag::VectorIndex::from_snapshot_bytes(&idx.to_snapshot_bytes()).unwrap();
        c.set_ef_search(10_000);
        c
    }));
    let s = Stack { table: Arc::new(exact), ..s };
    for q in ["VASP OUTCAR energies", "solver produces raw measurement", "battery electrolyte"] {
        let got = s.retriever().semantic_search(&SearchParams::new(q), &u("alice")).unwrap();
        let got: Vec<_> = got.results.into_iter().map(|c| (c.record_id, c.text)).collect();
        assert_eq!(got, reference_search(&s, q, 50, 8, "alice"), "query {q}");
    }
}

#[test]
fn reranker_outage_degrades_to_first_stage() {
    let s = polis_stack();
    let mut r = s.retriever();
    r.reranker = Arc::new(Unavailable::default());
    let params = SearchParams { query: "DFT solver".into(), k: 50, n: 8 };
    let resp = r.semantic_search(&params, &u("alice")).unwrap();
    assert!(resp.degraded);
    assert!(resp.results.iter().all(|c| c.rerank_score.is_none()));
    let allowed = s.repo.accessible_record_ids(&u("alice")).unwrap();
    let first = s.table.search(&s.embedder.embed_one("DFT solver"), 50, &allowed).unwrap();
    let want: Vec<_> = first.iter().take(8).map(|(n, _)| n.id).collect();
    let got: Vec<_> = resp.results.iter().map(|c| c.id).collect();
    assert_eq!(got, want);
    assert!(resp.results.windows(2).all(|w| w[0].first_stage_score >= w[1].first_stage_score));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn search_never_leaks(seed in any::<u64>(), query in "[a-z]{2,8}( [a-z]{2,8}){0,4}") {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut lines = polis();
        let users = ["u0", "u1", "u2"];
        grant_by(&mut lines, |_| {
            users.iter().filter(|_| rng.random_bool(0.3)).map(|x| (x.to_string(), Capability::Read)).collect()
        });
        let s = stack(lines, &users);
        for name in users {
            let allowed = s.repo.accessible_record_ids(&u(name)).unwrap();
            let params = SearchParams { query: query.clone(), k: 50, n: 20 };
            let resp = s.retriever().semantic_search(&params, &u(name)).unwrap();
            prop_assert!(resp.results.iter().all(|c| allowed.contains(&c.record_id)));
            prop_assert!(resp.results.len() <= 20);
        }
    }
}

// ---- synchronization ----

fn one_record() -> (Stack, RecordId) {
    let s = stack(vec![], &["alice"]);
    let rec = s.repo.create_record(NewRecord { identifier: "r".into(), title: "Record".into(), ..Default::default() }, &u("alice")).unwrap();
    (s, rec.record_id)
}

fn evt(record: RecordId, subject: SyncSubject, kind: SyncKind, sequence: u64) -> SyncEvent {
    SyncEvent { record_id: record, subject, kind, sequence }
}

#[test]
fn metadata_update_leaves_file_chunks() {
    let (s, id) = one_record();
    let engine = s.engine();
    let text = "Paragraph about cells.\n\n".repeat(200);
    s.repo.upload_file(id, "notes.md", MediaKind::Markdown, text.into_bytes(), &u("alice")).unwrap();
    let file = SyncSubject::File("notes.md".into());
    let out = engine.process_sync_event(&evt(id, file.clone(), SyncKind::CreatedOrUpdated, 1)).unwrap();
    assert!(out.chunks_written > 1);
    engine.process_sync_event(&evt(id, SyncSubject::Metadata, SyncKind::CreatedOrUpdated, 2)).unwrap();
    let before_file = s.table.count_subject(id, &file);
    let file_rows: Vec<_> = s.table.entries().into_iter().filter(|e| e.1 == file).collect();

    s.repo.update_metadata(id, MetadataPatch { title: Some("Renamed".into()), ..Default::default() }, &u("alice")).unwrap();
    let old_meta = s.table.count_subject(id, &SyncSubject::Metadata);
    let out = engine.process_sync_event(&evt(id, SyncSubject::Metadata, SyncKind::CreatedOrUpdated, 3)).unwrap();
    assert_eq!(out.chunks_deleted, old_meta);
    assert_eq!(s.table.count_subject(id, &file), before_file);
    let after: Vec<_> = s.table.entries().into_iter().filter(|e| e.1 == file).collect();
    assert_eq!(after, file_rows);
    assert!(s.table.entries().iter().any(|e| e.1 == SyncSubject::Metadata && e.3.contains("Renamed")));
}

#[test]
fn delete_file_counts() {
    let (s, id) = one_record();
    let engine = s.engine();
    s.repo.upload_file(id, "a.txt", MediaKind::PlainText, "word ".repeat(1000).into_bytes(), &u("alice")).unwrap();
    let file = SyncSubject::File("a.txt".into());
    engine.process_sync_event(&evt(id, file.clone(), SyncKind::CreatedOrUpdated, 1)).unwrap();
    let n = s.table.count_subject(id, &file);
    assert!(n >= 3);
    s.repo.delete_file(id, "a.txt", &u("alice")).unwrap();
    let out = engine.process_sync_event(&evt(id, file.clone(), SyncKind::Deleted, 2)).unwrap();
    assert_eq!(out, SyncOutcome { chunks_written: 0, chunks_deleted: n, skipped_reason: None });
    assert_eq!(s.table.count_subject(id, &file), 0);
}

#[test]
fn processing_twice_is_idempotent() {
    let (s, id) = one_record();
    let engine = s.engine();
    s.repo.upload_file(id, "c.rs", MediaKind::Code, "fn main() {}\n".repeat(300).into_bytes(), &u("alice")).unwrap();
    let e = evt(id, SyncSubject::File("c.rs".into()), SyncKind::CreatedOrUpdated, 1);
    engine.process_sync_event(&e).unwrap();
    let once = s.table.entries();
    engine.process_sync_event(&e).unwrap();
    assert_eq!(s.table.entries(), once);
}

#[test]
fn unsupported_and_broken_files() {
    let (s, id) = one_record();
    let engine = s.engine();
    s.repo.upload_file(id, "blob.bin", MediaKind::Unsupported, vec![0, 159, 146], &u("alice")).unwrap();
    let out = engine.process_sync_event(&evt(id, SyncSubject::File("blob.bin".into()), SyncKind::CreatedOrUpdated, 1)).unwrap();
    assert_eq!(out.chunks_written, 0);
    assert!(out.skipped_reason.is_some());

    s.repo.upload_file(id, "bad.txt", MediaKind::PlainText, vec![0xff, 0xfe], &u("alice")).unwrap();
    let err = engine.process_sync_event(&evt(id, SyncSubject::File("bad.txt".into()), SyncKind::CreatedOrUpdated, 2)).unwrap_err();
    assert!(matches!(err, SyncError::ExtractionFailed(_)));
    assert!(!err.is_retryable());

    s.repo.upload_file(id, "bad.json", MediaKind::Json, b"{oops".to_vec(), &u("alice")).unwrap();
    assert!(engine.process_sync_event(&evt(id, SyncSubject::File("bad.json".into()), SyncKind::CreatedOrUpdated, 3)).is_err());
    assert_eq!(s.table.count_subject(id, &SyncSubject::File("bad.json".into())), 0);
}

#[test]
fn embedder_outage_is_retryable_and_writes_nothing() {
    let (s, id) = one_record();
    let engine = SyncEngine { embedder: Arc::new(Unavailable { dimension: DIM }), ..s.engine() };
    let before = s.table.entries();
    let err = engine.process_sync_event(&evt(id, SyncSubject::Metadata, SyncKind::CreatedOrUpdated, 1)).unwrap_err();
    assert!(err.is_retryable());
    assert_eq!(s.table.entries(), before);
}

/// Embedder that fails its first `failures` calls.
struct Flaky {
    inner: HashingEmbedder,
    failures: AtomicUsize,
    calls: AtomicUsize,
}

impl Embedder for Flaky {
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, GatewayError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        if self.failures.fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1)).is_ok() {
            return Err(GatewayError::UpstreamUnavailable("flaky".into()));
        }
        self.inner.embed_batch(texts)
    }
}

fn queue_for(s: &Stack, embedder: Arc<dyn Embedder>, config: QueueConfig) -> Arc<SyncQueue> {
    let q = Arc::new(SyncQueue::new(SyncEngine { embedder, ..s.engine() }, config));
    s.repo.set_sink(q.clone());
    q
}

fn quick(workers: usize) -> QueueConfig {
    QueueConfig { workers, max_requeues: 5, retry_base_delay: Duration::from_millis(2) }
}

#[test]
fn queue_retries_then_succeeds() {
    let s = stack(vec![], &["alice"]);
    let flaky = Arc::new(Flaky { inner: HashingEmbedder::new(DIM, 1), failures: AtomicUsize::new(3), calls: AtomicUsize::new(0) });
    let q = queue_for(&s, flaky.clone(), quick(1));
    s.repo.create_record(NewRecord { identifier: "r".into(), title: "R".into(), ..Default::default() }, &u("alice")).unwrap();
    q.run_until_idle();
    assert_eq!(flaky.calls.load(Ordering::SeqCst), 4);
    let st = q.status();
    assert!(st.failed.is_empty());
    assert_eq!(st.last_sequence_per_record[&RecordId(1)], 1);
    assert_eq!(s.table.len(), 1);
}

#[test]
fn queue_gives_up_after_bounded_requeues() {
    let s = stack(vec![], &["alice"]);
    let q = queue_for(&s, Arc::new(Unavailable { dimension: DIM }), quick(1));
    s.repo.create_record(NewRecord { identifier: "r".into(), title: "R".into(), ..Default::default() }, &u("alice")).unwrap();
    q.run_until_idle();
    let st = q.status();
    assert_eq!(st.failed.len(), 1);
    assert_eq!(st.failed[0].attempts, 6);
    assert_eq!(st.queued, 0);
}

#[test]
fn extraction_failure_surfaces_in_status() {
    let s = stack(vec![], &["alice"]);
    let q = queue_for(&s, s.embedder.clone(), quick(1));
    let r = s.repo.create_record(NewRecord { identifier: "r".into(), title: "R".into(), ..Default::default() }, &u("alice")).unwrap();
    s.repo.upload_file(r.record_id, "bad.txt", MediaKind::PlainText, vec![0xff], &u("alice")).unwrap();
    q.run_until_idle();
    let st = q.status();
    assert_eq!(st.failed.len(), 1);
    assert_eq!(st.failed[0].attempts, 1);
    assert!(st.failed[0].error.contains("UTF-8"));
    // A fixed upload clears the failure.
    s.repo.upload_file(r.record_id, "bad.txt", MediaKind::PlainText, b"fine".to_vec(), &u("alice")).unwrap();
    q.run_until_idle();
    assert!(q.status().failed.is_empty());
}

#[test]
fn queued_events_coalesce() {
    let s = stack(vec![], &["alice"]);
    let counting = Arc::new(Flaky { inner: HashingEmbedder::new(DIM, 1), failures: AtomicUsize::new(0), calls: AtomicUsize::new(0) });
    let q = queue_for(&s, counting.clone(), quick(1));
    let r = s.repo.create_record(NewRecord { identifier: "r".into(), title: "R".into(), ..Default::default() }, &u("alice")).unwrap();
    for i in 0..10 {
        s.repo.update_metadata(r.record_id, MetadataPatch { title: Some(format!("t{i}")), ..Default::default() }, &u("alice")).unwrap();
    }
    assert_eq!(q.status().queued, 1);
    q.run_until_idle();
    assert_eq!(counting.calls.load(Ordering::SeqCst), 1);
    assert!(s.table.entries().iter().any(|e| e.3.contains("t9")));
}

/// Applies `n` random repository changes.
fn random_changes(repo: &Repository, rng: &mut ChaCha8Rng, n: usize, next_ident: &mut u32) {
    let alice = u("alice");
    let kinds = [MediaKind::PlainText, MediaKind::Markdown, MediaKind::Code, MediaKind::Json, MediaKind::Unsupported];
    for _ in 0..n {
        let ids: Vec<RecordId> = repo.list_records(&alice).unwrap().iter().map(|r| r.record_id).collect();
        let pick = |rng: &mut ChaCha8Rng| ids[rng.random_range(0..ids.len())];
        match rng.random_range(0..10) {
            0 | 1 if ids.len() < 30 || ids.is_empty() => {
                *next_ident += 1;
                repo.create_record(
                    NewRecord { identifier: format!("rec-{next_ident}"), title: format!("Record {next_ident}"), ..Default::default() },
                    &alice,
                )
                .unwrap();
            }
            _ if ids.is_empty() => {}
            2 | 3 => {
                let id = pick(rng);
                let extras = json!({"run": rng.random_range(0..1000), "notes": "lorem ipsum ".repeat(rng.random_range(0..300))});
                let patch = MetadataPatch {
                    description: Some(format!("desc {}", rng.random::<u32>())),
                    extras: Some(extras.as_object().unwrap().clone()),
                    ..Default::default()
                };
                repo.update_metadata(id, patch, &alice).unwrap();
            }
            4..=6 => {
                let id = pick(rng);
                let kind = kinds[rng.random_range(0..kinds.len())];
                let name = format!("f{}.dat", rng.random_range(0..3));
                let body = match kind {
                    MediaKind::Json => json!({"values": (0..rng.random_range(1..200)).collect::<Vec<_>>()}).to_string(),
                    _ => format!("line {} of text.\n", rng.random::<u16>()).repeat(rng.random_range(1..200)),
                };
                repo.upload_file(id, &name, kind, body.into_bytes(), &alice).unwrap();
            }
            7 | 8 => {
                let id = pick(rng);
                let rec = repo.get_record(id, &alice).unwrap();
                if let Some(f) = rec.files.first() {
                    repo.delete_file(id, &f.file_name, &alice).unwrap();
                }
            }
            _ => repo.delete_record(pick(rng), &alice).unwrap(),
        }
    }
}

fn rebuilt(s: &Stack) -> std::collections::BTreeSet<TableEntry> {
    rebuild_from_repository(&s.repo, s.embedder.as_ref(), test_params(), &ChunkConfig::default())
        .unwrap()
        .entries()
}

#[test]
fn random_replay_converges_to_rebuild() {
    for seed in 0..3 {
        let mut lines = polis();
        grant_all(&mut lines, "alice", Capability::Write);
        let s = stack(lines, &["alice"]);
        let q = queue_for(&s, s.embedder.clone(), quick(2));
        let workers = SyncWorkers::start(q.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut next = 0;
        random_changes(&s.repo, &mut rng, 100, &mut next);
        assert!(workers.shutdown(Some(Duration::from_secs(60))));
        assert!(q.status().failed.is_empty());
        assert_eq!(s.table.entries(), rebuilt(&s), "seed {seed}");
    }
}

#[test]
fn out_of_order_and_duplicate_delivery_converges() {
    let mut lines = polis();
    grant_all(&mut lines, "alice", Capability::Write);
    let s = stack(lines, &["alice"]);
    let sink = Arc::new(CollectingSink::default());
    s.repo.set_sink(sink.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut next = 0;
    random_changes(&s.repo, &mut rng, 100, &mut next);
    let mut events = sink.take();
    let dupes: Vec<_> = events.iter().step_by(3).cloned().collect();
    events.extend(dupes);
    use rand::seq::SliceRandom;
    events.shuffle(&mut rng);
    let engine = s.engine();
    for e in &events {
        let _ = engine.process_sync_event(e);
    }
    // Deliver the newest event of each (record, subject) once more in order,
    // as the queue's per-key coalescing would.
    let mut last: std::collections::BTreeMap<(RecordId, SyncSubject), SyncEvent> = Default::default();
    for e in events {
        let key = (e.record_id, e.subject.clone());
        if last.get(&key).map_or(true, |o| o.sequence < e.sequence) {
            last.insert(key, e);
        }
    }
    let mut ordered: Vec<_> = last.into_values().collect();
    ordered.sort_by_key(|e| e.sequence);
    for e in &ordered {
        let _ = engine.process_sync_event(e);
    }
    assert_eq!(s.table.entries(), rebuilt(&s));
}

#[test]
fn status_reports_idle_queue() {
    let s = stack(vec![], &["alice"]);
    let q = queue_for(&s, s.embedder.clone(), quick(2));
    let st = q.status();
    assert_eq!((st.queued, st.in_flight), (0, 0));
    assert!(q.wait_idle(Duration::from_millis(10)));
    let seen: HashSet<u64> = st.last_sequence_per_record.values().copied().collect();
    assert!(seen.is_empty());
}
