use std::collections::BTreeMap;
use std::sync::{Mutex, RwLock};

use super::lexicon::tokenize;

/// Sparse vector with sorted, unique indices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseVector {
    dim: usize,
    entries: Vec<(u32, f32)>,
}

impl SparseVector {
    pub fn from_entries(dim: usize, mut entries: Vec<(u32, f32)>) -> Self {
        entries.sort_by_key(|e| e.0);
        entries.dedup_by_key(|e| e.0);
        SparseVector { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(u32, f32)] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|e| e.1 == 0.0)
    }

    pub fn norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(_, w)| f64::from(w) * f64::from(w))
            .sum::<f64>()
            .sqrt()
    }
}

/// Cosine similarity; zero when either vector is zero.
pub fn cosine(a: &SparseVector, b: &SparseVector) -> f64 {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let (mut i, mut j, mut dot) = (0, 0, 0.0f64);
    let (x, y) = (&a.entries, &b.entries);
    while i < x.len() && j < y.len() {
        match x[i].0.cmp(&y[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                dot += f64::from(x[i].1) * f64::from(y[j].1);
                i += 1;
                j += 1;
            }
        }
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

pub trait Embedder: Send + Sync {
    fn embed(&self, text: &str) -> SparseVector;
    fn dimension(&self) -> usize;
    /// Adds a document to the corpus statistics. Default: stateless.
    fn observe(&self, _text: &str) {}
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

#[derive(Clone, Debug, Default)]
struct DocFreq {
    docs: u64,
    df: BTreeMap<u32, u64>,
}

/// Hashed term frequency weighted by smoothed IDF over the observed corpus.
///
/// Observations accumulate in a pending buffer and only affect embeddings
/// after [`HashedTfIdf::refresh`]; document-frequency counts commute, so the
/// result does not depend on the order concurrent callers observed in.
#[derive(Debug)]
pub struct HashedTfIdf {
    dim: usize,
    current: RwLock<DocFreq>,
    pending: Mutex<DocFreq>,
}

impl HashedTfIdf {
    pub const DEFAULT_DIM: usize = 512;

    pub fn new(dim: usize) -> Self {
        HashedTfIdf {
            dim: dim.max(1),
            current: RwLock::new(DocFreq::default()),
            pending: Mutex::new(DocFreq::default()),
        }
    }

    pub fn bucket(&self, token: &str) -> u32 {
        (fnv1a(token.as_bytes()) % self.dim as u64) as u32
    }

    /// Folds pending observations into the statistics used by `embed`.
    pub fn refresh(&self) {
        let mut pending = self.pending.lock().unwrap();
        let mut cur = self.current.write().unwrap();
        cur.docs += pending.docs;
        for (b, n) in std::mem::take(&mut pending.df) {
            *cur.df.entry(b).or_default() += n;
        }
        pending.docs = 0;
    }

    pub fn documents(&self) -> u64 {
        self.current.read().unwrap().docs
    }
}

impl Default for HashedTfIdf {
    fn default() -> Self {
        HashedTfIdf::new(Self::DEFAULT_DIM)
    }
}

impl Embedder for HashedTfIdf {
    fn embed(&self, text: &str) -> SparseVector {
        let mut tf: BTreeMap<u32, u32> = BTreeMap::new();
        for tok in tokenize(text) {
            *tf.entry(self.bucket(&tok)).or_default() += 1;
        }
        let stats = self.current.read().unwrap();
        let n = stats.docs as f64;
        let mut entries: Vec<(u32, f64)> = tf
            .into_iter()
            .map(|(b, c)| {
                let df = stats.df.get(&b).copied().unwrap_or(0) as f64;
                let idf = ((1.0 + n) / (1.0 + df)).ln() + 1.0;
                (b, f64::from(c) * idf)
            })
            .collect();
        let norm = entries.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
        if norm > 0.0 {
            for e in &mut entries {
                e.1 /= norm;
            }
        }
        SparseVector::from_entries(
            self.dim,
            entries.into_iter().map(|(b, w)| (b, w as f32)).collect(),
        )
    }

    fn dimension(&self) -> usize {
        self.dim
    }

    fn observe(&self, text: &str) {
        let mut buckets: Vec<u32> = tokenize(text).iter().map(|t| self.bucket(t)).collect();
        buckets.sort_unstable();
        buckets.dedup();
        let mut p = self.pending.lock().unwrap();
        p.docs += 1;
        for b in buckets {
            *p.df.entry(b).or_default() += 1;
        }
    }
}
