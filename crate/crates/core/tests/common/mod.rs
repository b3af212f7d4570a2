#![allow(dead_code)]

use std::collections::HashSet;
use std::sync::Arc;

use aclrag::chunking::ChunkConfig;
use aclrag::gateway::{HashingEmbedder, JaccardReranker};
use aclrag::index::{ChunkRow, HnswParams};
use aclrag::repository::{import_lines, FixtureLine, Repository};
use aclrag::retrieval::{rebuild_from_repository, Retriever, SyncEngine, VectorTable};
use aclrag::{ChunkId, RecordId, VectorIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn unit_vectors(n: usize, dim: usize, seed: u64) -> Vec<Vec<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut v: Vec<f32> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let n = v.iter().map(|x| x * x).sum::<f32>().sqrt();
            v.iter_mut().for_each(|x| *x /= n);
            v
        })
        .collect()
}

pub fn row(id: u64, record: u64, embedding: Vec<f32>) -> ChunkRow<f32> {
    ChunkRow {
        id: ChunkId(id),
        record_id: RecordId(record),
        from_metadata: true,
        file_name: None,
        embedding,
        text: format!("chunk {id}"),
    }
}

/// Index where vector `i` gets chunk id `i + 1` and record `records(i)`.
pub fn build(vectors: &[Vec<f32>], params: HnswParams, records: impl Fn(usize) -> u64) -> VectorIndex {
    let mut idx = VectorIndex::new(vectors[0].len(), params).unwrap();
    for (i, v) in vectors.iter().enumerate() {
        idx.insert(row(i as u64 + 1, records(i), v.clone())).unwrap();
    }
    idx
}

pub fn ids<S>(n: &[aclrag::index::Neighbor<S>]) -> Vec<ChunkId> {
    n.iter().map(|x| x.id).collect()
}

pub fn overlap<S>(a: &[aclrag::index::Neighbor<S>], b: &[aclrag::index::Neighbor<S>]) -> usize {
    let s: HashSet<ChunkId> = a.iter().map(|x| x.id).collect();
    b.iter().filter(|x| s.contains(&x.id)).count()
}

pub const DIM: usize = 256;

/// Small HNSW settings for fast tests over stub embeddings.
pub fn test_params() -> HnswParams {
    HnswParams { m: 8, ef_construction: 64, ef_search: 64, seed: 7 }
}

pub fn stack(lines: Vec<FixtureLine>, users: &[&str]) -> Stack {
    let repo = Arc::new(Repository::default());
    for u in users {
        repo.add_user(*u, *u, format!("token-{u}")).unwrap();
    }
    import_lines(&repo, lines).unwrap();
    let embedder = Arc::new(HashingEmbedder::new(DIM, 1));
    let table = Arc::new(
        rebuild_from_repository(&repo, embedder.as_ref(), test_params(), &ChunkConfig::default()).unwrap(),
    );
    Stack { repo, table, embedder }
}

pub struct Stack {
    pub repo: Arc<Repository>,
    pub table: Arc<VectorTable>,
    pub embedder: Arc<HashingEmbedder>,
}

impl Stack {
    pub fn retriever(&self) -> Retriever {
        Retriever {
            repo: self.repo.clone(),
            table: self.table.clone(),
            embedder: self.embedder.clone(),
            reranker: Arc::new(JaccardReranker),
        }
    }

    pub fn engine(&self) -> SyncEngine {
        SyncEngine {
            repo: self.repo.clone(),
            table: self.table.clone(),
            embedder: self.embedder.clone(),
            chunking: ChunkConfig::default(),
        }
    }
}
