//! Synthetic request traces: piecewise-Poisson arrivals, clustered query
//! embeddings with staggered cluster lifetimes, and the text-to-image
//! embedding model used when a generation completes.

mod calibrate;
mod trace;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

pub use calibrate::{calibrate_beta, closed_form_beta, median_similarity, Calibration};
pub use trace::{load_trace, parse_trace, save_trace, write_trace, TraceRecord};

use crate::cache::Embedding;
use crate::error::{Error, Result};

// Independent random streams derived from one seed.
const STREAM_ARRIVALS: u64 = 1;
const STREAM_SLOTS: u64 = 2;
const STREAM_CENTERS: u64 = 3;
const STREAM_QUERIES: u64 = 4;
const STREAM_IMAGES: u64 = 5;
pub(crate) const STREAM_CALIBRATION: u64 = 6;

/// Deterministic generator for `(seed, tag, index)`.
pub fn substream(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(tag)));
    rng.set_stream(index);
    rng
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Isotropic Gaussian with per-component variance `1/dim`, so the expected
/// squared norm is 1.
pub(crate) fn gaussian(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    let scale = 1.0 / (dim as f64).sqrt();
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal) * scale).collect()
}

/// Constant-rate stretch of the arrival schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSegment {
    pub duration_s: f64,
    pub rate_rpm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub rate_schedule: Vec<RateSegment>,
    pub n_clusters: u32,
    /// Seconds each cluster stays active before its slot gets a fresh
    /// center. `None` keeps every cluster forever.
    pub cluster_lifetime_s: Option<f64>,
    /// Scale of the per-query perturbation around the cluster center.
    pub spread: f64,
    /// Weight of the query in the generated image's embedding.
    pub beta: f64,
    pub seed: u64,
    pub dim: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            rate_schedule: vec![RateSegment {
                duration_s: 3600.0,
                rate_rpm: 8.0,
            }],
            n_clusters: 64,
            cluster_lifetime_s: Some(4.0 * 3600.0),
            spread: 0.6,
            beta: 0.32,
            seed: 0,
            dim: 512,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        for (i, seg) in self.rate_schedule.iter().enumerate() {
            if !(seg.rate_rpm >= 0.0 && seg.rate_rpm.is_finite()) {
                return Err(Error::Config(format!(
                    "workload.rate_schedule[{i}].rate_rpm must be finite and >= 0"
                )));
            }
            if !(seg.duration_s >= 0.0 && seg.duration_s.is_finite()) {
                return Err(Error::Config(format!(
                    "workload.rate_schedule[{i}].duration_s must be finite and >= 0"
                )));
            }
        }
        if self.n_clusters == 0 {
            return Err(Error::Config("workload.n_clusters must be >= 1".into()));
        }
        if let Some(l) = self.cluster_lifetime_s {
            if l.is_nan() || l <= 0.0 {
                return Err(Error::Config("workload.cluster_lifetime_s must be > 0".into()));
            }
        }
        if !(self.spread >= 0.0 && self.spread.is_finite()) {
            return Err(Error::Config("workload.spread must be finite and >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Config("workload.beta must be in [0, 1]".into()));
        }
        if self.dim == 0 {
            return Err(Error::Config("workload.dim must be >= 1".into()));
        }
        Ok(())
    }

    pub fn total_duration_s(&self) -> f64 {
        self.rate_schedule.iter().map(|s| s.duration_s).sum()
    }

    pub fn clusters(&self) -> ClusterModel {
        ClusterModel {
            seed: self.seed,
            dim: self.dim,
            spread: self.spread,
            n_clusters: self.n_clusters,
            lifetime_s: self.cluster_lifetime_s,
        }
    }

    pub fn image_model(&self) -> ImageModel {
        ImageModel {
            beta: self.beta,
            seed: self.seed,
        }
    }
}

/// Poisson arrival times in seconds. Gaps within a segment are exponential
/// with mean `60 / rate`; a zero-rate segment contributes nothing.
pub fn gen_arrivals(schedule: &[RateSegment], seed: u64) -> Vec<f64> {
    let mut rng = substream(seed, STREAM_ARRIVALS, 0);
    let mut out = Vec::new();
    let mut start = 0.0;
    for seg in schedule {
        let end = start + seg.duration_s;
        if seg.rate_rpm > 0.0 {
            let gap = Exp::new(seg.rate_rpm / 60.0).expect("positive rate");
            let mut t = start;
            loop {
                t += gap.sample(&mut rng);
                if t >= end {
                    break;
                }
                out.push(t);
            }
        }
        start = end;
    }
    out
}

/// Fixed pool of cluster slots. Slot `i` replaces its center every
/// `lifetime_s`, offset by `i / n_clusters` of a lifetime so retirements are
/// spread evenly over time.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub seed: u64,
    pub dim: usize,
    pub spread: f64,
    pub n_clusters: u32,
    pub lifetime_s: Option<f64>,
}

impl ClusterModel {
    /// Cluster active in `slot` at time `t`.
    pub fn cluster_at(&self, slot: u32, t: f64) -> u64 {
        let generation = match self.lifetime_s {
            None => 0,
            Some(life) => {
                let offset = life * f64::from(slot) / f64::from(self.n_clusters);
                ((t + offset) / life).floor().max(0.0) as u64
            }
        };
        (u64::from(slot) << 32) | generation
    }

    pub fn center(&self, cluster: u64) -> Vec<f64> {
        let mut rng = substream(self.seed, STREAM_CENTERS, cluster);
        let mut c = gaussian(&mut rng, self.dim);
        let n = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        c.iter_mut().for_each(|x| *x /= n);
        c
    }

    /// Query `index` drawn around `cluster`'s center.
    pub fn query(&self, cluster: u64, index: u64) -> Embedding {
        self.query_from_center(&self.center(cluster), index)
    }

    fn query_from_center(&self, center: &[f64], index: u64) -> Embedding {
        let mut rng = substream(self.seed, STREAM_QUERIES, index);
        let noise = gaussian(&mut rng, self.dim);
        let v: Vec<f64> = center.iter().zip(&noise).map(|(c, g)| c + self.spread * g).collect();
        Embedding::normalize_f64(&v).expect("perturbed unit vector is non-zero")
    }
}

/// One trace record per arrival, each drawing a uniformly random slot and
/// taking that slot's live cluster.
pub fn gen_queries(cfg: &GeneratorConfig, arrivals: &[f64]) -> Vec<TraceRecord> {
    let model = cfg.clusters();
    let mut slots = substream(cfg.seed, STREAM_SLOTS, 0);
    let mut centers: std::collections::HashMap<u64, Vec<f64>> = Default::default();
    arrivals
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let slot = slots.random_range(0..cfg.n_clusters);
            let cluster = model.cluster_at(slot, t);
            let center = centers.entry(cluster).or_insert_with(|| model.center(cluster));
            TraceRecord {
                id: format!("q{i:07}"),
                arrival_ms: (t * 1000.0).round() as u64,
                embedding: model.query_from_center(center, i as u64),
                cluster: Some(cluster),
            }
        })
        .collect()
}

/// Arrivals plus queries for a full generator config.
pub fn generate_trace(cfg: &GeneratorConfig) -> Result<Vec<TraceRecord>> {
    cfg.validate()?;
    Ok(gen_queries(cfg, &gen_arrivals(&cfg.rate_schedule, cfg.seed)))
}

/// `normalize(beta * query + (1 - beta) * h)` with `h ~ N(0, I/D)`.
pub fn image_embedding(query: &Embedding, beta: f64, rng: &mut impl Rng) -> Embedding {
    let h = gaussian(rng, query.dim());
    let v: Vec<f64> = query
        .as_slice()
        .iter()
        .zip(&h)
        .map(|(&q, g)| beta * f64::from(q) + (1.0 - beta) * g)
        .collect();
    // beta = 1 reproduces the query; otherwise h is almost surely non-zero.
    Embedding::normalize_f64(&v).unwrap_or_else(|_| query.clone())
}

/// Stand-in for the generator's image encoder: each request's image noise is
/// drawn from its own stream so results do not depend on completion order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageModel {
    pub beta: f64,
    pub seed: u64,
}

impl ImageModel {
    pub fn generate(&self, request_index: u64, query: &Embedding) -> Embedding {
        let mut rng = substream(self.seed, STREAM_IMAGES, request_index);
        image_embedding(query, self.beta, &mut rng)
    }
}
