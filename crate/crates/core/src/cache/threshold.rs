use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Discrete set of skippable step counts.
pub const STEP_SET: [u32; 6] = [5, 10, 15, 20, 25, 30];

/// One row of a [`ThresholdTable`]: similarity at or above `tau` allows
/// skipping `k` denoising steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Threshold {
    pub k: u32,
    pub tau: f64,
}

/// Similarity thresholds per skippable step count, ordered by `k`.
///
/// Both `k` and `tau` are strictly increasing. The smallest `tau` doubles as
/// the cache-hit threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Threshold>", into = "Vec<Threshold>")]
pub struct ThresholdTable {
    rows: Vec<Threshold>,
}

impl ThresholdTable {
    pub fn new(rows: Vec<Threshold>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidThresholds("table is empty".into()));
        }
        for r in &rows {
            if !r.tau.is_finite() || !(-1.0..=1.0).contains(&r.tau) {
                return Err(Error::InvalidThresholds(format!(
                    "tau {} for k={} outside [-1, 1]",
                    r.tau, r.k
                )));
            }
        }
        for w in rows.windows(2) {
            if w[1].k <= w[0].k {
                return Err(Error::InvalidThresholds(format!(
                    "k must be strictly increasing ({} then {})",
                    w[0].k, w[1].k
                )));
            }
            if w[1].tau <= w[0].tau {
                return Err(Error::InvalidThresholds(format!(
                    "tau must be strictly increasing with k (k={} tau={}, k={} tau={})",
                    w[0].k, w[0].tau, w[1].k, w[1].tau
                )));
            }
        }
        Ok(ThresholdTable { rows })
    }

    /// Builds a table from `(k, tau)` pairs.
    pub fn from_pairs(pairs: &[(u32, f64)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(k, tau)| Threshold { k, tau }).collect())
    }

    /// Evenly spaced thresholds between `lo` (k=5) and `hi` (k=30).
    pub fn evenly_spaced(lo: f64, hi: f64) -> Result<Self> {
        let n = STEP_SET.len() - 1;
        Self::new(
            STEP_SET
                .iter()
                .enumerate()
                .map(|(i, &k)| Threshold {
                    k,
                    tau: lo + (hi - lo) * i as f64 / n as f64,
                })
                .collect(),
        )
    }

    /// Thresholds used for the text-to-text retrieval baseline.
    pub fn text_baseline() -> Self {
        Self::from_pairs(&[(5, 0.65), (10, 0.71), (15, 0.77), (20, 0.83), (25, 0.89), (30, 0.95)])
            .expect("static table is valid")
    }

    /// Checks the table against a model's total step count and the allowed
    /// step set.
    pub fn validate_for(&self, total_steps: u32) -> Result<()> {
        if let Some(r) = self.rows.iter().find(|r| !STEP_SET.contains(&r.k)) {
            return Err(Error::InvalidThresholds(format!(
                "k={} not in allowed set {:?}",
                r.k, STEP_SET
            )));
        }
        if self.max_k() >= total_steps {
            return Err(Error::InvalidThresholds(format!(
                "max k {} must be below total steps {total_steps}",
                self.max_k()
            )));
        }
        Ok(())
    }

    pub fn rows(&self) -> &[Threshold] {
        &self.rows
    }

    /// Cache-hit threshold.
    pub fn hit_threshold(&self) -> f64 {
        self.rows[0].tau
    }

    pub fn max_k(&self) -> u32 {
        self.rows[self.rows.len() - 1].k
    }

    /// Largest `k` whose threshold the similarity reaches (inclusive), or
    /// `None` for a miss.
    pub fn select_k(&self, similarity: f64) -> Option<u32> {
        self.rows.iter().rev().find(|r| similarity >= r.tau).map(|r| r.k)
    }
}

impl Default for ThresholdTable {
    fn default() -> Self {
        Self::from_pairs(&[(5, 0.25), (10, 0.26), (15, 0.27), (20, 0.28), (25, 0.29), (30, 0.30)])
            .expect("static table is valid")
    }
}

impl TryFrom<Vec<Threshold>> for ThresholdTable {
    type Error = Error;

    fn try_from(rows: Vec<Threshold>) -> Result<Self> {
        Self::new(rows)
    }
}

impl From<ThresholdTable> for Vec<Threshold> {
    fn from(t: ThresholdTable) -> Self {
        t.rows
    }
}
