//! In-process event queue with a pool of worker threads.
//!
//! A queued event is superseded by any newer event for the same
//! (record, subject). Events of one record are processed one at a time in
//! sequence order; different records proceed in parallel.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use parking_lot::{Condvar, Mutex};
use serde::{Deserialize, Serialize};

use super::events::{SyncEvent, SyncSink, SyncSubject};
use super::sync::{SyncEngine, SyncError, SyncOutcome};
use crate::ids::RecordId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct QueueConfig {
    pub workers: usize,
    /// Requeues after a retryable failure before the event is marked failed.
    pub max_requeues: u32,
    #[serde(with = "millis")]
    pub retry_base_delay: Duration,
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

impl Default for QueueConfig {
    fn default() -> Self {
        Self { workers: 2, max_requeues: 5, retry_base_delay: Duration::from_millis(200) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailedEvent {
    pub event: SyncEvent,
    pub error: String,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyncStatus {
    pub queued: usize,
    pub in_flight: usize,
    pub failed: Vec<FailedEvent>,
    pub last_sequence_per_record: BTreeMap<RecordId, u64>,
}

type Key = (RecordId, SyncSubject);

#[derive(Debug)]
struct Pending {
    event: SyncEvent,
    attempts: u32,
    not_before: Option<Instant>,
}

#[derive(Default)]
struct State {
    order: BTreeMap<u64, Key>,
    pending: HashMap<Key, Pending>,
    busy_records: HashSet<RecordId>,
    failed: Vec<FailedEvent>,
    last_sequence: BTreeMap<RecordId, u64>,
    shutdown: bool,
}

enum Next {
    Job(Pending),
    Wait(Option<Instant>),
}

impl State {
    fn key(e: &SyncEvent) -> Key {
        (e.record_id, e.subject.clone())
    }

    fn enqueue(&mut self, p: Pending) {
        let key = Self::key(&p.event);
        if let Some(old) = self.pending.get(&key) {
            if old.event.sequence > p.event.sequence {
                return;
            }
            self.order.remove(&old.event.sequence);
        }
        self.order.insert(p.event.sequence, key.clone());
        self.pending.insert(key, p);
    }

    fn take_next(&mut self, now: Instant) -> Next {
        let mut blocked: HashSet<RecordId> = HashSet::new();
        let mut wake: Option<Instant> = None;
        let mut chosen = None;
        for (&seq, key) in &self.order {
            let record = key.0;
            if self.busy_records.contains(&record) || blocked.contains(&record) {
                continue;
            }
            match self.pending[key].not_before {
                Some(t) if t > now => {
                    // Later events of this record wait behind the delayed one.
                    blocked.insert(record);
                    wake = Some(wake.map_or(t, |w| w.min(t)));
                }
                _ => {
                    chosen = Some((seq, key.clone()));
                    break;
                }
            }
        }
        match chosen {
            Some((seq, key)) => {
                self.order.remove(&seq);
                self.busy_records.insert(key.0);
                Next::Job(self.pending.remove(&key).expect("order and pending agree"))
            }
            None => Next::Wait(wake),
        }
    }

    fn idle(&self) -> bool {
        self.pending.is_empty() && self.busy_records.is_empty()
    }
}

pub struct SyncQueue {
    state: Mutex<State>,
    work: Condvar,
    idle: Condvar,
    engine: SyncEngine,
    config: QueueConfig,
}

impl SyncSink for SyncQueue {
    fn publish(&self, event: SyncEvent) {
        self.state.lock().enqueue(Pending { event, attempts: 0, not_before: None });
        self.work.notify_one();
    }
}

impl SyncQueue {
    pub fn new(engine: SyncEngine, config: QueueConfig) -> Self {
        Self { state: Mutex::default(), work: Condvar::new(), idle: Condvar::new(), engine, config }
    }

    pub fn engine(&self) -> &SyncEngine {
        &self.engine
    }

    pub fn config(&self) -> &QueueConfig {
        &self.config
    }

    pub fn status(&self) -> SyncStatus {
        let s = self.state.lock();
        SyncStatus {
            queued: s.pending.len(),
            in_flight: s.busy_records.len(),
            failed: s.failed.clone(),
            last_sequence_per_record: s.last_sequence.clone(),
        }
    }

    /// Blocks until nothing is queued or in flight. Returns false on timeout.
    pub fn wait_idle(&self, timeout: Duration) -> bool {
        let deadline = Instant::now() + timeout;
        let mut s = self.state.lock();
        while !s.idle() {
            if self.idle.wait_until(&mut s, deadline).timed_out() {
                return s.idle();
            }
        }
        true
    }

    /// Processes one ready event on the calling thread, if any.
    pub fn step(&self) -> Option<Result<SyncOutcome, SyncError>> {
        let job = match self.state.lock().take_next(Instant::now()) {
            Next::Job(j) => j,
            Next::Wait(_) => return None,
        };
        Some(self.run(job))
    }

    /// Processes events on the calling thread until the queue is empty,
    /// sleeping through retry delays.
    pub fn run_until_idle(&self) {
        loop {
            let next = self.state.lock().take_next(Instant::now());
            match next {
                Next::Job(j) => {
                    let _ = self.run(j);
                }
                Next::Wait(Some(t)) => std::thread::sleep(t.saturating_duration_since(Instant::now())),
                Next::Wait(None) => return,
            }
        }
    }

    fn run(&self, job: Pending) -> Result<SyncOutcome, SyncError> {
        let result = self.engine.process_sync_event(&job.event);
        self.finish(job, &result);
        result
    }

    fn finish(&self, mut job: Pending, result: &Result<SyncOutcome, SyncError>) {
        let mut s = self.state.lock();
        let record = job.event.record_id;
        let key = State::key(&job.event);
        s.busy_records.remove(&record);
        match result {
            Ok(outcome) => {
                tracing::debug!(record = %record, subject = %job.event.subject, ?outcome, "sync event applied");
                let seq = job.event.sequence;
                s.failed.retain(|f| State::key(&f.event) != key || f.event.sequence > seq);
                s.last_sequence.insert(record, seq);
            }
            Err(e) if e.is_retryable() && job.attempts < self.config.max_requeues => {
                job.attempts += 1;
                let delay = self.config.retry_base_delay * 2u32.saturating_pow(job.attempts - 1);
                tracing::warn!(record = %record, attempt = job.attempts, error = %e, "sync event requeued");
                job.not_before = Some(Instant::now() + delay);
                s.enqueue(job);
            }
            Err(e) => {
                tracing::error!(record = %record, subject = %job.event.subject, error = %e, "sync event failed");
                s.last_sequence.insert(record, job.event.sequence);
                s.failed.push(FailedEvent { event: job.event, error: e.to_string(), attempts: job.attempts + 1 });
            }
        }
        let idle = s.idle();
        drop(s);
        self.work.notify_all();
        if idle {
            self.idle.notify_all();
        }
    }
}

/// Worker threads draining a [`SyncQueue`].
pub struct SyncWorkers {
    queue: Arc<SyncQueue>,
    handles: Vec<JoinHandle<()>>,
}

impl SyncWorkers {
    pub fn start(queue: Arc<SyncQueue>) -> Self {
        let n = queue.config.workers.max(1);
        let handles = (0..n)
            .map(|i| {
                let q = queue.clone();
                std::thread::Builder::new()
                    .name(format!("sync-worker-{i}"))
                    .spawn(move || worker_loop(&q))
                    .expect("spawn sync worker")
            })
            .collect();
        Self { queue, handles }
    }

    pub fn queue(&self) -> &Arc<SyncQueue> {
        &self.queue
    }

    /// Optionally waits for the queue to drain, then stops the workers.
    pub fn shutdown(mut self, drain: Option<Duration>) -> bool {
        let drained = drain.map_or(true, |t| self.queue.wait_idle(t));
        self.stop();
        drained
    }

    fn stop(&mut self) {
        self.queue.state.lock().shutdown = true;
        self.queue.work.notify_all();
        for h in self.handles.drain(..) {
            let _ = h.join();
        }
    }
}

impl Drop for SyncWorkers {
    fn drop(&mut self) {
        self.stop();
    }
}

fn worker_loop(q: &SyncQueue) {
    loop {
        let job = {
            let mut s = q.state.lock();
            loop {
                if s.shutdown {
                    return;
                }
                match s.take_next(Instant::now()) {
                    Next::Job(j) => break j,
                    Next::Wait(Some(t)) => {
                        q.work.wait_until(&mut s, t);
                    }
                    Next::Wait(None) => q.work.wait(&mut s),
                }
            }
        };
        let _ = q.run(job);
    }
}
