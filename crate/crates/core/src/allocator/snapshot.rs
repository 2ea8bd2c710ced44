use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What the monitor observed over the last period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorSnapshot {
    /// Requests per minute.
    pub rate_rpm: f64,
    pub hit_rate: f64,
    /// Fraction of hits assigned to each skipped-step count.
    pub k_dist: BTreeMap<u32, f64>,
    pub workers: u32,
}

impl MonitorSnapshot {
    pub fn new(rate_rpm: f64, hit_rate: f64, k_dist: BTreeMap<u32, f64>, workers: u32) -> Result<Self> {
        let s = MonitorSnapshot {
            rate_rpm,
            hit_rate,
            k_dist,
            workers,
        };
        s.validate()?;
        Ok(s)
    }

    /// Snapshot where every hit skips the same number of steps.
    pub fn single_k(rate_rpm: f64, hit_rate: f64, k: u32, workers: u32) -> Result<Self> {
        Self::new(rate_rpm, hit_rate, BTreeMap::from([(k, 1.0)]), workers)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate_rpm >= 0.0 && self.rate_rpm.is_finite()) {
            return Err(Error::InvalidSnapshot(format!("rate {} must be >= 0", self.rate_rpm)));
        }
        if !(0.0..=1.0).contains(&self.hit_rate) {
            return Err(Error::InvalidSnapshot(format!(
                "hit rate {} outside [0, 1]",
                self.hit_rate
            )));
        }
        if self.workers == 0 {
            return Err(Error::InvalidSnapshot("need at least one worker".into()));
        }
        if self.k_dist.values().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidSnapshot("k probabilities must lie in [0, 1]".into()));
        }
        if self.hit_rate > 0.0 {
            let total: f64 = self.k_dist.values().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidSnapshot(format!(
                    "k distribution sums to {total}, expected 1"
                )));
            }
        }
        Ok(())
    }

    /// Builds a snapshot from raw period counters. `None` when the period
    /// saw no arrivals.
    pub fn from_counts(arrivals: u64, hits_by_k: &BTreeMap<u32, u64>, period_s: f64, workers: u32) -> Option<Self> {
        if arrivals == 0 {
            return None;
        }
        let hits: u64 = hits_by_k.values().sum();
        let k_dist = if hits == 0 {
            BTreeMap::new()
        } else {
            hits_by_k.iter().map(|(&k, &n)| (k, n as f64 / hits as f64)).collect()
        };
        let mut s = MonitorSnapshot {
            rate_rpm: arrivals as f64 * 60.0 / period_s,
            hit_rate: hits as f64 / arrivals as f64,
            k_dist,
            workers,
        };
        // renormalize against rounding in the division above
        let total: f64 = s.k_dist.values().sum();
        if total > 0.0 && (total - 1.0).abs() > 1e-12 {
            for p in s.k_dist.values_mut() {
                *p /= total;
            }
        }
        Some(s)
    }
}
