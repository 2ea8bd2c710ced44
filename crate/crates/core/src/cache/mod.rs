//! Embedding-keyed FIFO store of generated images.
//!
//! Entries are scanned exhaustively on every lookup; the cache never holds
//! image bytes, only the embedding of each image plus its provenance. The
//! type has no interior mutability, so wrapping it in an `RwLock` gives the
//! many-readers-or-one-writer contract directly.

mod embedding;
mod noise;
mod snapshot;
mod threshold;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

pub use embedding::{cosine, Embedding, NORM_TOLERANCE};
pub use noise::NoiseSchedule;
pub use snapshot::{export_jsonl, import_jsonl, read_snapshot, write_snapshot};
pub use threshold::{Threshold, ThresholdTable, STEP_SET};

use crate::allocator::ModelClass;
use crate::error::{Error, Result};

/// Which generated images are admitted into the cache.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CachePolicy {
    /// Every completed generation, from either model class.
    CacheAll,
    /// Only outputs of the large model.
    CacheLarge,
    /// Nothing is ever cached.
    Disabled,
}

impl CachePolicy {
    pub fn admits(self, producer: ModelClass) -> bool {
        match self {
            CachePolicy::CacheAll => true,
            CachePolicy::CacheLarge => producer == ModelClass::Large,
            CachePolicy::Disabled => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheEntry {
    pub id: u64,
    pub seq: u64,
    /// Simulated seconds.
    pub inserted_at: f64,
    pub producer: ModelClass,
    pub embedding: Embedding,
}

/// Outcome of a lookup. `entry` and `k` are both present on a hit and both
/// absent on a miss; `similarity` is the best score seen (negative infinity
/// when the cache is empty).
#[derive(Debug, Clone, Copy)]
pub struct RetrievalResult<'a> {
    pub entry: Option<&'a CacheEntry>,
    pub similarity: f64,
    pub k: Option<u32>,
}

impl RetrievalResult<'_> {
    pub fn is_hit(&self) -> bool {
        self.entry.is_some()
    }
}

#[derive(Debug, Clone)]
pub struct SemanticCache {
    capacity: usize,
    policy: CachePolicy,
    max_age: Option<f64>,
    dim: Option<usize>,
    entries: VecDeque<CacheEntry>,
    next_seq: u64,
}

impl SemanticCache {
    pub fn new(capacity: usize, policy: CachePolicy) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("cache capacity must be at least 1".into()));
        }
        Ok(SemanticCache {
            capacity,
            policy,
            max_age: None,
            dim: None,
            entries: VecDeque::new(),
            next_seq: 0,
        })
    }

    /// Entries older than `max_age` simulated seconds are evicted on the next
    /// insert or [`SemanticCache::expire`] call.
    pub fn with_max_age(mut self, max_age: Option<f64>) -> Self {
        self.max_age = max_age;
        self
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn policy(&self) -> CachePolicy {
        self.policy
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Live entries, oldest first.
    pub fn entries(&self) -> impl Iterator<Item = &CacheEntry> {
        self.entries.iter()
    }

    /// Stores a generated image, assigning the next insertion sequence
    /// number. Returns the entries evicted to make room. A producer the
    /// policy does not admit leaves the cache untouched.
    pub fn insert(
        &mut self,
        id: u64,
        embedding: Embedding,
        producer: ModelClass,
        inserted_at: f64,
    ) -> Result<Vec<CacheEntry>> {
        if !self.policy.admits(producer) {
            return Ok(Vec::new());
        }
        self.check_dim(embedding.dim())?;
        let seq = self.next_seq;
        self.next_seq += 1;
        let mut evicted = self.expire(inserted_at);
        self.entries.push_back(CacheEntry {
            id,
            seq,
            inserted_at,
            producer,
            embedding,
        });
        while self.entries.len() > self.capacity {
            evicted.extend(self.entries.pop_front());
        }
        Ok(evicted)
    }

    /// Drops entries older than the configured max age relative to `now`.
    pub fn expire(&mut self, now: f64) -> Vec<CacheEntry> {
        let mut evicted = Vec::new();
        if let Some(max_age) = self.max_age {
            while self.entries.front().is_some_and(|e| now - e.inserted_at > max_age) {
                evicted.extend(self.entries.pop_front());
            }
        }
        evicted
    }

    /// Most similar live entry, subject to the table's hit threshold. Ties on
    /// similarity go to the most recently inserted entry.
    pub fn retrieve(&self, q: &Embedding, table: &ThresholdTable) -> Result<RetrievalResult<'_>> {
        if let Some(dim) = self.dim {
            if !self.entries.is_empty() && q.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: q.dim(),
                });
            }
        }
        let query = q.as_slice();
        let mut best: Option<(&CacheEntry, f64)> = None;
        for e in &self.entries {
            let s = embedding::dot(query, e.embedding.as_slice());
            match best {
                Some((b, bs)) if s < bs || (s == bs && e.seq < b.seq) => {}
                _ => best = Some((e, s)),
            }
        }
        Ok(match best {
            None => RetrievalResult {
                entry: None,
                similarity: f64::NEG_INFINITY,
                k: None,
            },
            Some((entry, similarity)) => match table.select_k(similarity) {
                Some(k) => RetrievalResult {
                    entry: Some(entry),
                    similarity,
                    k: Some(k),
                },
                None => RetrievalResult {
                    entry: None,
                    similarity,
                    k: None,
                },
            },
        })
    }

    /// Replaces the contents with `entries`, which must be in strictly
    /// increasing `seq` order. Capacity and policy still apply.
    pub fn restore(&mut self, entries: Vec<CacheEntry>) -> Result<()> {
        self.entries.clear();
        self.dim = None;
        for e in entries {
            if let Some(last) = self.entries.back() {
                if e.seq <= last.seq {
                    return Err(Error::Invariant(format!(
                        "snapshot seq {} not after {}",
                        e.seq, last.seq
                    )));
                }
            }
            self.check_dim(e.embedding.dim())?;
            self.next_seq = self.next_seq.max(e.seq + 1);
            self.entries.push_back(e);
            while self.entries.len() > self.capacity {
                self.entries.pop_front();
            }
        }
        Ok(())
    }

    fn check_dim(&mut self, dim: usize) -> Result<()> {
        match self.dim {
            Some(d) if d != dim => Err(Error::DimensionMismatch {
                expected: d,
                actual: dim,
            }),
            Some(_) => Ok(()),
            None => {
                self.dim = Some(dim);
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(v: &[f32]) -> Embedding {
        Embedding::normalize(v).unwrap()
    }

    fn ids(c: &SemanticCache) -> Vec<u64> {
        c.entries().map(|e| e.id).collect()
    }

    #[test]
    fn fifo_eviction_order() {
        let mut c = SemanticCache::new(2, CachePolicy::CacheAll).unwrap();
        assert!(c
            .insert(1, unit(&[1.0, 0.0]), ModelClass::Large, 0.0)
            .unwrap()
            .is_empty());
        assert!(c
            .insert(2, unit(&[0.0, 1.0]), ModelClass::Large, 1.0)
            .unwrap()
            .is_empty());
        let evicted = c.insert(3, unit(&[1.0, 1.0]), ModelClass::Small, 2.0).unwrap();
        assert_eq!(evicted.iter().map(|e| e.id).collect::<Vec<_>>(), vec![1]);
        assert_eq!(ids(&c), vec![2, 3]);
    }

    #[test]
    fn cache_large_ignores_small_outputs() {
        let mut c = SemanticCache::new(4, CachePolicy::CacheLarge).unwrap();
        c.insert(1, unit(&[1.0, 0.0]), ModelClass::Large, 0.0).unwrap();
        let evicted = c.insert(2, unit(&[0.0, 1.0]), ModelClass::Small, 1.0).unwrap();
        assert!(evicted.is_empty());
        assert_eq!(ids(&c), vec![1]);
    }

    #[test]
    fn disabled_policy_never_stores() {
        let mut c = SemanticCache::new(4, CachePolicy::Disabled).unwrap();
        c.insert(1, unit(&[1.0, 0.0]), ModelClass::Large, 0.0).unwrap();
        assert!(c.is_empty());
    }

    #[test]
    fn zero_capacity_rejected() {
        assert!(SemanticCache::new(0, CachePolicy::CacheAll).is_err());
    }

    #[test]
    fn max_age_evicts_stale_entries_on_insert() {
        let hour = 3600.0;
        let mut c = SemanticCache::new(10, CachePolicy::CacheAll)
            .unwrap()
            .with_max_age(Some(4.0 * hour));
        c.insert(1, unit(&[1.0, 0.0]), ModelClass::Large, 0.0).unwrap();
        c.insert(2, unit(&[0.0, 1.0]), ModelClass::Large, 2.0 * hour).unwrap();
        let evicted = c.insert(3, unit(&[1.0, 1.0]), ModelClass::Large, 5.0 * hour).unwrap();
        assert_eq!(evicted.iter().map(|e| e.id).collect::<Vec<_>>(), vec![1]);
        assert_eq!(ids(&c), vec![2, 3]);
    }

    #[test]
    fn empty_cache_misses() {
        let c = SemanticCache::new(4, CachePolicy::CacheAll).unwrap();
        let r = c.retrieve(&unit(&[1.0, 0.0]), &ThresholdTable::default()).unwrap();
        assert!(!r.is_hit());
        assert_eq!(r.k, None);
    }

    #[test]
    fn below_threshold_misses() {
        let mut c = SemanticCache::new(4, CachePolicy::CacheAll).unwrap();
        let s = 0.24f32;
        c.insert(1, unit(&[s, (1.0 - s * s).sqrt()]), ModelClass::Large, 0.0)
            .unwrap();
        let r = c.retrieve(&unit(&[1.0, 0.0]), &ThresholdTable::default()).unwrap();
        assert!(!r.is_hit());
        assert!((r.similarity - 0.24).abs() < 1e-6);
    }

    #[test]
    fn ties_go_to_most_recent() {
        let mut c = SemanticCache::new(4, CachePolicy::CacheAll).unwrap();
        let s = 0.31f32;
        let e = unit(&[s, (1.0 - s * s).sqrt()]);
        c.insert(7, e.clone(), ModelClass::Large, 0.0).unwrap();
        c.insert(8, e, ModelClass::Large, 1.0).unwrap();
        let r = c.retrieve(&unit(&[1.0, 0.0]), &ThresholdTable::default()).unwrap();
        assert_eq!(r.entry.unwrap().id, 8);
        assert_eq!(r.k, Some(30));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let mut c = SemanticCache::new(4, CachePolicy::CacheAll).unwrap();
        c.insert(1, unit(&[1.0, 0.0]), ModelClass::Large, 0.0).unwrap();
        assert!(c.insert(2, unit(&[1.0, 0.0, 0.0]), ModelClass::Large, 0.0).is_err());
        assert!(c.retrieve(&unit(&[1.0, 0.0, 0.0]), &ThresholdTable::default()).is_err());
    }

    proptest! {
        #[test]
        fn retains_most_recent_eligible(
            cap in 1usize..8,
            producers in prop::collection::vec(any::<bool>(), 0..40),
            large_only in any::<bool>(),
        ) {
            let policy = if large_only { CachePolicy::CacheLarge } else { CachePolicy::CacheAll };
            let mut c = SemanticCache::new(cap, policy).unwrap();
            let mut eligible = Vec::new();
            for (i, &is_large) in producers.iter().enumerate() {
                let class = if is_large { ModelClass::Large } else { ModelClass::Small };
                c.insert(i as u64, unit(&[1.0, i as f32]), class, i as f64).unwrap();
                if policy.admits(class) {
                    eligible.push(i as u64);
                }
                prop_assert!(c.len() <= cap);
            }
            let keep = eligible.len().saturating_sub(cap);
            prop_assert_eq!(ids(&c), eligible[keep..].to_vec());
            let seqs: Vec<u64> = c.entries().map(|e| e.seq).collect();
            prop_assert!(seqs.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
