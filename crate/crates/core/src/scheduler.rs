//! Request intake: hit/miss classification against the semantic cache, the
//! two FIFO queues, and the per-model-class dispatch rule.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::allocator::{AllocationMode, ModelClass};
use crate::cache::{CachePolicy, Embedding, SemanticCache, ThresholdTable};
use crate::error::{Error, Result};

/// Which side of a cached generation is compared against incoming queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RetrievalKey {
    /// Cached image embeddings (text-to-image similarity).
    Image,
    /// The prompt embedding that produced the cached image (text-to-text).
    Text,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Classification {
    Hit {
        k: u32,
        source_id: u64,
        /// Simulated time the source entry was cached.
        source_inserted_at: f64,
        similarity: f64,
        /// Kept with the request so eviction before dispatch is harmless.
        source: Embedding,
    },
    Miss,
}

impl Classification {
    pub fn k(&self) -> Option<u32> {
        match self {
            Classification::Hit { k, .. } => Some(*k),
            Classification::Miss => None,
        }
    }

    pub fn is_hit(&self) -> bool {
        matches!(self, Classification::Hit { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RequestStatus {
    New,
    Queued,
    Running,
    Done,
}

#[derive(Debug, Clone)]
pub struct Request {
    pub id: u64,
    /// Identifier from the trace.
    pub name: String,
    /// Simulated seconds.
    pub arrival: f64,
    pub query: Embedding,
    pub classification: Classification,
    status: RequestStatus,
}

impl Request {
    pub fn new(id: u64, name: impl Into<String>, arrival: f64, query: Embedding) -> Self {
        Request {
            id,
            name: name.into(),
            arrival,
            query,
            classification: Classification::Miss,
            status: RequestStatus::New,
        }
    }

    pub fn status(&self) -> RequestStatus {
        self.status
    }

    fn advance(&mut self, to: RequestStatus) -> Result<()> {
        if to <= self.status {
            return Err(Error::Invariant(format!(
                "request {} cannot move from {:?} to {:?}",
                self.id, self.status, to
            )));
        }
        self.status = to;
        Ok(())
    }

    pub fn start(&mut self) -> Result<()> {
        self.advance(RequestStatus::Running)
    }

    pub fn finish(&mut self) -> Result<()> {
        self.advance(RequestStatus::Done)
    }
}

/// Hit and miss queues, each FIFO by arrival.
#[derive(Debug, Default)]
pub struct QueuePair {
    hit: VecDeque<Request>,
    miss: VecDeque<Request>,
}

impl QueuePair {
    pub fn hit_len(&self) -> usize {
        self.hit.len()
    }

    pub fn miss_len(&self) -> usize {
        self.miss.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hit.is_empty() && self.miss.is_empty()
    }

    pub fn push(&mut self, mut r: Request) -> Result<()> {
        r.advance(RequestStatus::Queued)?;
        if r.classification.is_hit() {
            self.hit.push_back(r);
        } else {
            self.miss.push_back(r);
        }
        Ok(())
    }
}

/// Whether large workers may take hits once the miss queue is empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DispatchPolicy {
    pub large_takes_hits: bool,
}

impl DispatchPolicy {
    pub fn for_mode(mode: AllocationMode, work_conservation: bool) -> Self {
        DispatchPolicy {
            large_takes_hits: match mode {
                AllocationMode::Quality => true,
                AllocationMode::Throughput => work_conservation,
            },
        }
    }
}

/// Looks the request up in the cache and records the outcome on it.
pub fn classify(r: &mut Request, cache: Option<&SemanticCache>, table: &ThresholdTable) -> Result<Classification> {
    let c = match cache {
        None => Classification::Miss,
        Some(cache) => {
            let found = cache.retrieve(&r.query, table)?;
            match (found.entry, found.k) {
                (Some(e), Some(k)) => Classification::Hit {
                    k,
                    source_id: e.id,
                    source_inserted_at: e.inserted_at,
                    similarity: found.similarity,
                    source: e.embedding.clone(),
                },
                _ => Classification::Miss,
            }
        }
    };
    r.classification = c.clone();
    Ok(c)
}

/// Next request for an idle worker of `class`. Large workers drain misses
/// first; small workers only ever take hits.
pub fn dispatch(class: ModelClass, q: &mut QueuePair, policy: DispatchPolicy) -> Option<Request> {
    match class {
        ModelClass::Large => q.miss.pop_front().or_else(|| {
            if policy.large_takes_hits {
                q.hit.pop_front()
            } else {
                None
            }
        }),
        ModelClass::Small => q.hit.pop_front(),
    }
}

/// Inserts the completed generation per the cache policy. Returns whether
/// the cache accepted it.
pub fn on_completion(
    r: &Request,
    image: &Embedding,
    producer: ModelClass,
    now: f64,
    cache: &mut SemanticCache,
    key: RetrievalKey,
) -> Result<bool> {
    if r.status() != RequestStatus::Done {
        return Err(Error::Invariant(format!(
            "request {} completed while {:?}",
            r.id,
            r.status()
        )));
    }
    if !cache.policy().admits(producer) {
        return Ok(false);
    }
    let stored = match key {
        RetrievalKey::Image => image.clone(),
        RetrievalKey::Text => r.query.clone(),
    };
    cache.insert(r.id, stored, producer, now)?;
    Ok(true)
}

/// Convenience for tests and tools: a cache that admits nothing.
pub fn is_disabled(policy: CachePolicy) -> bool {
    policy == CachePolicy::Disabled
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(v: &[f32]) -> Embedding {
        Embedding::normalize(v).unwrap()
    }

    /// Unit vector with cosine `s` against (1, 0).
    fn at_similarity(s: f32) -> Embedding {
        unit(&[s, (1.0 - s * s).sqrt()])
    }

    fn req(id: u64) -> Request {
        Request::new(id, format!("r{id}"), id as f64, unit(&[1.0, 0.0]))
    }

    #[test]
    fn classify_examples() {
        let table = ThresholdTable::default();
        let mut cache = SemanticCache::new(8, CachePolicy::CacheAll).unwrap();
        let mut r = req(1);
        assert_eq!(classify(&mut r, Some(&cache), &table).unwrap(), Classification::Miss);

        cache.insert(10, at_similarity(0.31), ModelClass::Large, 0.0).unwrap();
        let mut r = req(2);
        assert_eq!(classify(&mut r, Some(&cache), &table).unwrap().k(), Some(30));

        let mut boundary = SemanticCache::new(8, CachePolicy::CacheAll).unwrap();
        boundary
            .insert(
                11,
                Embedding::from_unit(vec![0.25, 0.9375f32.sqrt()]).unwrap(),
                ModelClass::Large,
                0.0,
            )
            .unwrap();
        let mut r = req(3);
        let c = classify(&mut r, Some(&boundary), &table).unwrap();
        assert_eq!(c.k(), Some(5));
    }

    #[test]
    fn queues_route_by_classification() {
        let table = ThresholdTable::default();
        let mut cache = SemanticCache::new(8, CachePolicy::CacheAll).unwrap();
        let mut q = QueuePair::default();
        let mut miss = req(1);
        classify(&mut miss, Some(&cache), &table).unwrap();
        q.push(miss).unwrap();
        cache.insert(10, at_similarity(0.31), ModelClass::Large, 0.0).unwrap();
        let mut hit = req(2);
        classify(&mut hit, Some(&cache), &table).unwrap();
        q.push(hit).unwrap();
        assert_eq!((q.miss_len(), q.hit_len()), (1, 1));
    }

    fn queued(hits: &[u64], misses: &[u64]) -> QueuePair {
        let mut q = QueuePair::default();
        for &id in hits {
            let mut r = req(id);
            r.classification = Classification::Hit {
                k: 25,
                source_id: 0,
                source_inserted_at: 0.0,
                similarity: 0.3,
                source: unit(&[1.0, 0.0]),
            };
            q.push(r).unwrap();
        }
        for &id in misses {
            q.push(req(id)).unwrap();
        }
        q
    }

    #[test]
    fn large_prefers_misses() {
        let mut q = queued(&[1], &[2]);
        let p = DispatchPolicy::for_mode(AllocationMode::Quality, true);
        assert_eq!(dispatch(ModelClass::Large, &mut q, p).unwrap().id, 2);
        assert_eq!(dispatch(ModelClass::Large, &mut q, p).unwrap().id, 1);
        assert!(dispatch(ModelClass::Large, &mut q, p).is_none());
    }

    #[test]
    fn small_never_takes_misses() {
        let mut q = queued(&[], &[2]);
        let p = DispatchPolicy::for_mode(AllocationMode::Quality, true);
        assert!(dispatch(ModelClass::Small, &mut q, p).is_none());
    }

    #[test]
    fn strict_throughput_mode_keeps_large_off_hits() {
        let mut q = queued(&[1], &[]);
        let strict = DispatchPolicy::for_mode(AllocationMode::Throughput, false);
        assert!(dispatch(ModelClass::Large, &mut q, strict).is_none());
        let conserving = DispatchPolicy::for_mode(AllocationMode::Throughput, true);
        assert_eq!(dispatch(ModelClass::Large, &mut q, conserving).unwrap().id, 1);
    }

    #[test]
    fn dispatch_is_fifo_within_class() {
        let mut q = queued(&[3, 5, 7], &[]);
        let p = DispatchPolicy::for_mode(AllocationMode::Quality, true);
        let order: Vec<u64> = std::iter::from_fn(|| dispatch(ModelClass::Small, &mut q, p).map(|r| r.id)).collect();
        assert_eq!(order, vec![3, 5, 7]);
    }

    fn done(id: u64) -> Request {
        let mut r = req(id);
        r.advance(RequestStatus::Queued).unwrap();
        r.start().unwrap();
        r.finish().unwrap();
        r
    }

    #[test]
    fn completion_respects_policy() {
        let img = unit(&[0.0, 1.0]);
        let mut all = SemanticCache::new(8, CachePolicy::CacheAll).unwrap();
        assert!(on_completion(&done(1), &img, ModelClass::Small, 1.0, &mut all, RetrievalKey::Image).unwrap());
        assert_eq!(all.len(), 1);
        assert_eq!(all.entries().next().unwrap().embedding, img);

        let mut large = SemanticCache::new(8, CachePolicy::CacheLarge).unwrap();
        assert!(!on_completion(&done(1), &img, ModelClass::Small, 1.0, &mut large, RetrievalKey::Image).unwrap());
        assert!(large.is_empty());

        let mut off = SemanticCache::new(8, CachePolicy::Disabled).unwrap();
        assert!(!on_completion(&done(1), &img, ModelClass::Large, 1.0, &mut off, RetrievalKey::Image).unwrap());
    }

    #[test]
    fn text_key_stores_the_query() {
        let img = unit(&[0.0, 1.0]);
        let mut c = SemanticCache::new(8, CachePolicy::CacheAll).unwrap();
        let r = done(4);
        on_completion(&r, &img, ModelClass::Large, 1.0, &mut c, RetrievalKey::Text).unwrap();
        assert_eq!(c.entries().next().unwrap().embedding, r.query);
    }

    #[test]
    fn status_only_moves_forward() {
        let mut r = req(1);
        assert!(r.start().is_ok());
        assert!(r.start().is_err());
        assert!(r.finish().is_ok());
        assert!(r.advance(RequestStatus::Queued).is_err());
        let r = req(2);
        let mut c = SemanticCache::new(8, CachePolicy::CacheAll).unwrap();
        assert!(on_completion(
            &r,
            &unit(&[1.0, 0.0]),
            ModelClass::Large,
            0.0,
            &mut c,
            RetrievalKey::Image
        )
        .is_err());
    }
}
