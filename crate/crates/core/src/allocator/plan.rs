//! Workload accounting and the two heuristic allocation modes.
//!
//! Workloads are expressed in full-generation equivalents per minute so
//! they can be compared directly against profiled per-worker throughput.

use serde::{Deserialize, Serialize};

use super::MonitorSnapshot;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllocationMode {
    /// Maximize large workers while still meeting demand.
    Quality,
    /// Misses on large workers, every hit on small workers.
    Throughput,
}

impl std::fmt::Display for AllocationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AllocationMode::Quality => "quality",
            AllocationMode::Throughput => "throughput",
        })
    }
}

impl std::str::FromStr for AllocationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quality" => Ok(AllocationMode::Quality),
            "throughput" => Ok(AllocationMode::Throughput),
            other => Err(Error::Config(format!(
                "unknown mode {other:?} (expected quality or throughput)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub n_large: u32,
    pub n_small: u32,
    pub mode: AllocationMode,
    /// Demand exceeds what any split of the cluster can serve.
    pub saturated: bool,
}

/// Workload that needs a full generation on a large model.
pub fn miss_workload(s: &MonitorSnapshot) -> f64 {
    (1.0 - s.hit_rate) * s.rate_rpm
}

/// Mean fraction of the schedule a hit still has to run.
pub fn refinement_factor(s: &MonitorSnapshot, total_steps: u32) -> Result<f64> {
    let t = f64::from(total_steps);
    s.k_dist.iter().try_fold(0.0, |acc, (&k, &p)| {
        if k >= total_steps {
            Err(Error::InvalidSnapshot(format!(
                "k={k} must be below total steps {total_steps}"
            )))
        } else {
            Ok(acc + p * (1.0 - f64::from(k) / t))
        }
    })
}

/// Refinement workload of cache hits.
pub fn hit_workload(s: &MonitorSnapshot, total_steps: u32) -> Result<f64> {
    if s.hit_rate == 0.0 {
        return Ok(0.0);
    }
    Ok(s.hit_rate * s.rate_rpm * refinement_factor(s, total_steps)?)
}

/// Spare throughput after both workloads are served by the given split.
/// Negative means the hit constraint is violated.
pub(crate) fn hit_slack(n_large: u32, workers: u32, p_large: f64, p_small: f64, w_miss: f64, w_hit: f64) -> f64 {
    (f64::from(n_large) * p_large - w_miss) + f64::from(workers - n_large) * p_small - w_hit
}

pub(crate) fn meets_miss(n_large: u32, p_large: f64, w_miss: f64) -> bool {
    f64::from(n_large) * p_large >= w_miss
}

/// Largest number of large workers that meets both throughput constraints.
///
/// When the large pool cannot cover misses even with every worker, the plan
/// is all-large and flagged saturated. When misses fit but no split serves
/// the hits as well, the split with the most spare hit throughput is chosen
/// (ties toward more large workers), also flagged saturated.
pub fn quality_allocate(s: &MonitorSnapshot, total_steps: u32, p_large: f64, p_small: f64) -> Result<AllocationPlan> {
    let n = s.workers;
    let w_miss = miss_workload(s);
    let w_hit = hit_workload(s, total_steps)?;
    let plan = |n_large: u32, saturated: bool| AllocationPlan {
        n_large,
        n_small: n - n_large,
        mode: AllocationMode::Quality,
        saturated,
    };

    let Some(n_min) = (1..=n).find(|&k| meets_miss(k, p_large, w_miss)) else {
        return Ok(plan(n, true));
    };
    if let Some(best) = (n_min..=n)
        .rev()
        .find(|&k| hit_slack(k, n, p_large, p_small, w_miss, w_hit) >= 0.0)
    {
        return Ok(plan(best, false));
    }
    let mut best = n_min;
    for k in n_min..=n {
        if hit_slack(k, n, p_large, p_small, w_miss, w_hit) >= hit_slack(best, n, p_large, p_small, w_miss, w_hit) {
            best = k;
        }
    }
    Ok(plan(best, true))
}

/// Fractional large-worker target proportional to the miss share of the
/// throughput-weighted workload. Returns `idle_default` when there is no
/// workload at all.
pub fn throughput_allocate(
    s: &MonitorSnapshot,
    total_steps: u32,
    p_large: f64,
    p_small: f64,
    idle_default: f64,
) -> Result<f64> {
    if p_small.is_nan() || p_small <= 0.0 {
        return Err(Error::Config("small model throughput must be positive".into()));
    }
    let w_miss = miss_workload(s);
    let w_hit_weighted = hit_workload(s, total_steps)? / (p_small / p_large);
    let total = w_hit_weighted + w_miss;
    if total <= 0.0 {
        return Ok(idle_default);
    }
    Ok(w_miss / total * f64::from(s.workers))
}

/// Compute saved by reusing cached images, per request, in units of
/// `gen_cost` (one full large-model generation). Returns `(saved by skipped
/// steps alone, saved including the cheaper small-model refinement)`;
/// `small_cost` is the small model's cost for the same work.
pub fn compute_savings(s: &MonitorSnapshot, gen_cost: f64, small_cost: f64, total_steps: u32) -> (f64, f64) {
    let t = f64::from(total_steps);
    let mut saved = 0.0;
    let mut total_saved = 0.0;
    for (&k, &p) in &s.k_dist {
        let skipped = f64::from(k) / t;
        saved += skipped * gen_cost * p;
        total_saved += p * (skipped * gen_cost + (t - f64::from(k)) / t * (gen_cost - small_cost));
    }
    (s.hit_rate * saved, s.hit_rate * total_saved)
}
