use serde::{Deserialize, Serialize};

use crate::allocator::{AllocationMode, MonitorConfig, ProfileSet};
use crate::cache::{CachePolicy, ThresholdTable};
use crate::error::{Error, Result};
use crate::scheduler::RetrievalKey;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CacheConfig {
    pub capacity: usize,
    pub policy: CachePolicy,
    /// Entries older than this many simulated seconds are dropped.
    pub max_age_s: Option<f64>,
    pub key: RetrievalKey,
    pub thresholds: ThresholdTable,
}

impl Default for CacheConfig {
    fn default() -> Self {
        CacheConfig {
            capacity: 10_000,
            policy: CachePolicy::CacheAll,
            max_age_s: None,
            key: RetrievalKey::Image,
            thresholds: ThresholdTable::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Requests released after this many seconds are dropped. `None` replays
    /// the whole trace.
    pub duration_s: Option<f64>,
    pub seed: u64,
    pub workers: u32,
    pub profiles: ProfileSet,
    pub mode: AllocationMode,
    /// Fixed number of large workers; disables monitor decisions.
    pub static_n_large: Option<u32>,
    pub cache: CacheConfig,
    pub monitor: MonitorConfig,
    pub slo_multipliers: Vec<f64>,
    /// Let idle large workers take hits in throughput mode.
    pub work_conservation: bool,
    /// Fixed seconds added to every request's service time.
    pub overhead_s: f64,
    /// Ignore trace timestamps and release requests at this rate instead.
    pub release_rate_rpm: Option<f64>,
    /// Closed-loop load: keep this many requests in the system and release
    /// the next one whenever one completes. Ignores trace timestamps.
    pub outstanding: Option<usize>,
    /// Leading trace records whose large-model images seed the cache
    /// instead of being served.
    pub warmup_requests: usize,
    /// Look a queued miss up again when a large worker picks it.
    pub reclassify_on_dispatch: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            duration_s: None,
            seed: 0,
            workers: 16,
            profiles: ProfileSet::default(),
            mode: AllocationMode::Quality,
            static_n_large: None,
            cache: CacheConfig::default(),
            monitor: MonitorConfig::default(),
            slo_multipliers: vec![2.0, 4.0],
            work_conservation: true,
            overhead_s: 1.0,
            release_rate_rpm: None,
            outstanding: None,
            warmup_requests: 0,
            reclassify_on_dispatch: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if let Some(d) = self.duration_s {
            if d.is_nan() || d <= 0.0 {
                return bad("sim.duration_s must be > 0");
            }
        }
        if self.workers == 0 {
            return bad("sim.workers must be >= 1");
        }
        self.profiles.validate()?;
        if let Some(n) = self.static_n_large {
            if n == 0 || n > self.workers {
                return bad("sim.static_n_large must be in [1, workers]");
            }
        }
        if self.cache.capacity == 0 {
            return bad("sim.cache.capacity must be >= 1");
        }
        if let Some(a) = self.cache.max_age_s {
            if a.is_nan() || a <= 0.0 {
                return bad("sim.cache.max_age_s must be > 0");
            }
        }
        self.cache.thresholds.validate_for(self.profiles.total_steps())?;
        if !(self.monitor.period_s > 0.0 && self.monitor.period_s.is_finite()) {
            return bad("sim.monitor.period_s must be > 0");
        }
        if self.slo_multipliers.iter().any(|&m| m.is_nan() || m <= 0.0) {
            return bad("sim.slo_multipliers must be > 0");
        }
        if !(self.overhead_s >= 0.0 && self.overhead_s.is_finite()) {
            return bad("sim.overhead_s must be >= 0");
        }
        if let Some(r) = self.release_rate_rpm {
            if !(r > 0.0 && r.is_finite()) {
                return bad("sim.release_rate_rpm must be > 0");
            }
        }
        match (self.outstanding, self.release_rate_rpm) {
            (Some(0), _) => return bad("sim.outstanding must be >= 1"),
            (Some(_), Some(_)) => return bad("sim.outstanding and sim.release_rate_rpm are exclusive"),
            _ => {}
        }
        Ok(())
    }

    /// Full large-model latency including overhead; the SLO reference.
    pub fn l_ref_s(&self) -> f64 {
        let l = &self.profiles.large;
        f64::from(l.total_steps) * l.per_step_latency_s + self.overhead_s
    }

    /// Requests per minute an all-large cluster sustains.
    pub fn vanilla_capacity_rpm(&self) -> f64 {
        f64::from(self.workers) * 60.0 / self.l_ref_s()
    }
}
