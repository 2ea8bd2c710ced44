//! Per-request outcomes folded into throughput, tail latency, SLO, hit-rate
//! and energy figures.

mod emit;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use emit::{emit, write_audit_log, write_series_csv, write_summary, write_sweep_csv, SweepRow};

use crate::allocator::ModelClass;
use crate::error::{Error, Result};

/// Bumped whenever a field of the summary JSON or a CSV column changes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestOutcome {
    pub id: u64,
    pub name: String,
    pub arrival: f64,
    pub dispatch: f64,
    pub completion: f64,
    /// Skipped steps; `None` for a miss.
    pub k: Option<u32>,
    pub similarity: Option<f64>,
    /// Age of the source cache entry when the request was classified.
    pub source_age_s: Option<f64>,
    pub serving_model: String,
    pub serving_class: ModelClass,
    pub worker: u32,
    pub steps_executed: u32,
    pub energy_j: f64,
}

impl RequestOutcome {
    pub fn latency(&self) -> f64 {
        self.completion - self.arrival
    }

    pub fn is_hit(&self) -> bool {
        self.k.is_some()
    }
}

/// One line of the per-request audit log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub id: u64,
    pub arrival: f64,
    pub classified: String,
    pub k: Option<u32>,
    pub queue_wait: f64,
    pub service_time: f64,
    pub worker: u32,
    pub model: String,
    pub completion: f64,
}

impl From<&RequestOutcome> for AuditRecord {
    fn from(o: &RequestOutcome) -> Self {
        AuditRecord {
            id: o.id,
            arrival: o.arrival,
            classified: if o.is_hit() { "hit" } else { "miss" }.into(),
            k: o.k,
            queue_wait: o.dispatch - o.arrival,
            service_time: o.completion - o.dispatch,
            worker: o.worker,
            model: o.serving_model.clone(),
            completion: o.completion,
        }
    }
}

/// State sampled at each monitor tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickSample {
    pub time_s: f64,
    pub hit_queue: usize,
    pub miss_queue: usize,
    pub n_large: u32,
    pub n_small: u32,
    pub arrivals: u64,
    pub completions: u64,
    /// Completions in the period, per minute.
    pub throughput_rpm: f64,
    /// Hit rate of the period's arrivals; 0 when there were none.
    pub hit_rate: f64,
    pub small_profile: String,
    pub saturated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SloRate {
    pub multiplier: f64,
    pub violation_rate: f64,
}

/// Constants the report needs besides the outcomes themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportContext {
    /// Full large-model generation latency, the SLO reference.
    pub l_ref_s: f64,
    pub slo_multipliers: Vec<f64>,
    pub large_step_energy_j: f64,
    pub total_steps: u32,
    pub switches: u64,
    pub warmup_requests: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub requests: u64,
    pub hits: u64,
    pub misses: u64,
    pub hit_rate: f64,
    pub k_histogram: BTreeMap<u32, u64>,
    /// First arrival to last completion.
    pub makespan_s: f64,
    pub throughput_rpm: f64,
    pub mean_latency_s: Option<f64>,
    pub p99_latency_s: Option<f64>,
    pub l_ref_s: f64,
    pub slo: Vec<SloRate>,
    pub energy_total_j: f64,
    pub energy_savings_vs_vanilla: f64,
    pub served_by: BTreeMap<String, u64>,
    pub switches: u64,
    pub warmup_requests: u64,
}

impl MetricsReport {
    pub fn from_outcomes(outcomes: &[RequestOutcome], ctx: &ReportContext) -> Self {
        let n = outcomes.len() as u64;
        let mut k_histogram = BTreeMap::new();
        let mut served_by = BTreeMap::new();
        for o in outcomes {
            if let Some(k) = o.k {
                *k_histogram.entry(k).or_insert(0) += 1;
            }
            *served_by.entry(o.serving_model.clone()).or_insert(0) += 1;
        }
        let hits: u64 = k_histogram.values().sum();
        let latencies: Vec<f64> = outcomes.iter().map(RequestOutcome::latency).collect();
        let makespan_s = match (
            outcomes.iter().map(|o| o.arrival).reduce(f64::min),
            outcomes.iter().map(|o| o.completion).reduce(f64::max),
        ) {
            (Some(a), Some(c)) => c - a,
            _ => 0.0,
        };
        let (energy_total_j, energy_savings_vs_vanilla) =
            energy_account(outcomes, ctx.large_step_energy_j, ctx.total_steps);
        MetricsReport {
            schema_version: SCHEMA_VERSION,
            requests: n,
            hits,
            misses: n - hits,
            hit_rate: if n == 0 { 0.0 } else { hits as f64 / n as f64 },
            k_histogram,
            makespan_s,
            throughput_rpm: if makespan_s > 0.0 {
                n as f64 * 60.0 / makespan_s
            } else {
                0.0
            },
            mean_latency_s: (n > 0).then(|| latencies.iter().sum::<f64>() / n as f64),
            p99_latency_s: p99(&latencies).ok(),
            l_ref_s: ctx.l_ref_s,
            slo: ctx
                .slo_multipliers
                .iter()
                .map(|&m| SloRate {
                    multiplier: m,
                    violation_rate: slo_rate(&latencies, ctx.l_ref_s, m),
                })
                .collect(),
            energy_total_j,
            energy_savings_vs_vanilla,
            served_by,
            switches: ctx.switches,
            warmup_requests: ctx.warmup_requests,
        }
    }

    pub fn slo_rate(&self, multiplier: f64) -> Option<f64> {
        self.slo
            .iter()
            .find(|s| s.multiplier == multiplier)
            .map(|s| s.violation_rate)
    }
}

/// Nearest-rank percentile: the smallest value with at least `p` percent of
/// the sample at or below it.
pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Invariant("percentile of an empty sample".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * v.len() as f64).ceil() as usize;
    Ok(v[rank.clamp(1, v.len()) - 1])
}

pub fn p99(latencies: &[f64]) -> Result<f64> {
    percentile(latencies, 99.0)
}

/// Fraction of latencies above `multiplier * l_ref`.
pub fn slo_rate(latencies: &[f64], l_ref: f64, multiplier: f64) -> f64 {
    if latencies.is_empty() {
        return 0.0;
    }
    let limit = multiplier * l_ref;
    latencies.iter().filter(|&&l| l > limit).count() as f64 / latencies.len() as f64
}

/// Total energy of the executed steps and the saving against running every
/// request for all `T` steps on the large model.
pub fn energy_account(outcomes: &[RequestOutcome], large_step_energy_j: f64, total_steps: u32) -> (f64, f64) {
    let total: f64 = outcomes.iter().map(|o| o.energy_j).sum();
    let vanilla = outcomes.len() as f64 * f64::from(total_steps) * large_step_energy_j;
    let savings = if vanilla > 0.0 { 1.0 - total / vanilla } else { 0.0 };
    (total, savings)
}

/// Cross-checks a report against the outcomes it came from.
pub fn check_invariants(report: &MetricsReport, outcomes: &[RequestOutcome], total_steps: u32) -> Result<()> {
    let fail = |m: String| Err(Error::Invariant(m));
    for o in outcomes {
        if !(o.arrival <= o.dispatch && o.dispatch <= o.completion) {
            return fail(format!(
                "request {}: arrival {} dispatch {} completion {} out of order",
                o.id, o.arrival, o.dispatch, o.completion
            ));
        }
        let expected = total_steps - o.k.unwrap_or(0);
        if o.steps_executed != expected {
            return fail(format!(
                "request {}: executed {} steps, expected {expected}",
                o.id, o.steps_executed
            ));
        }
    }
    let rates = std::iter::once(report.hit_rate).chain(report.slo.iter().map(|s| s.violation_rate));
    for r in rates {
        if !(0.0..=1.0).contains(&r) {
            return fail(format!("rate {r} outside [0, 1]"));
        }
    }
    if report.k_histogram.values().sum::<u64>() != report.hits {
        return fail("k histogram does not sum to the hit count".into());
    }
    if report.hits + report.misses != report.requests || report.requests != outcomes.len() as u64 {
        return fail("hits + misses != requests".into());
    }
    if report.requests > 0 && (report.hit_rate * report.requests as f64).round() as u64 != report.hits {
        return fail("hit rate inconsistent with hit count".into());
    }
    Ok(())
}
