//! Periodic allocation controller.
//!
//! Each tick turns the last period's snapshot into a heuristic large-worker
//! target, moves a persistent fractional allocation toward it through the
//! PID controller, and rounds the result into a plan. Persistent saturation
//! escalates the small model along the configured profile list.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::plan::{hit_slack, meets_miss};
use super::{
    hit_workload, miss_workload, quality_allocate, throughput_allocate, AllocationMode, AllocationPlan,
    MonitorSnapshot, PidController, PidGains, ProfileSet,
};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonitorConfig {
    pub period_s: f64,
    pub gains: PidGains,
    /// Integral clamp; defaults to the worker count.
    pub integral_limit: Option<f64>,
    /// Consecutive saturated (or clear) ticks before escalating (or
    /// de-escalating) the small model.
    pub escalation_ticks: u32,
    /// Large workers before the first decision; defaults to all workers.
    pub initial_n_large: Option<u32>,
    /// Target used when a period has no workload at all.
    pub idle_default: f64,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig {
            period_s: 60.0,
            gains: PidGains::default(),
            integral_limit: None,
            escalation_ticks: 2,
            initial_n_large: None,
            idle_default: 1.0,
        }
    }
}

/// Result of one controller step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickOutcome {
    pub plan: AllocationPlan,
    /// Heuristic target before the PID, clamped to `[1, N]`.
    pub target: f64,
    pub delta: f64,
}

/// One controller step: heuristic target, PID adjustment of `current`, then
/// rounding and clamping into a plan. Zero gains run open loop, so the plan
/// equals the clamped heuristic target.
#[allow(clippy::too_many_arguments)]
pub fn monitor_tick(
    s: &MonitorSnapshot,
    mode: AllocationMode,
    total_steps: u32,
    p_large: f64,
    p_small: f64,
    pid: &mut PidController,
    current: &mut f64,
    idle_default: f64,
) -> Result<TickOutcome> {
    let n = f64::from(s.workers);
    let raw = match mode {
        AllocationMode::Quality => f64::from(quality_allocate(s, total_steps, p_large, p_small)?.n_large),
        AllocationMode::Throughput => throughput_allocate(s, total_steps, p_large, p_small, idle_default)?,
    };
    let target = raw.clamp(1.0, n);
    let delta = if pid.gains().is_zero() {
        target - *current
    } else {
        pid.step(target, *current)
    };
    *current = (*current + delta).clamp(1.0, n);
    let n_large = (current.round() as u32).clamp(1, s.workers);
    let saturated = is_saturated(s, total_steps, p_large, p_small, n_large)?;
    Ok(TickOutcome {
        plan: AllocationPlan {
            n_large,
            n_small: s.workers - n_large,
            mode,
            saturated,
        },
        target,
        delta,
    })
}

/// Whether the split cannot keep up with the snapshot's demand.
pub fn is_saturated(s: &MonitorSnapshot, total_steps: u32, p_large: f64, p_small: f64, n_large: u32) -> Result<bool> {
    let w_miss = miss_workload(s);
    let w_hit = hit_workload(s, total_steps)?;
    Ok(!meets_miss(n_large, p_large, w_miss) || hit_slack(n_large, s.workers, p_large, p_small, w_miss, w_hit) < 0.0)
}

/// One line of the monitor decision log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorDecision {
    pub tick: u64,
    pub time_s: f64,
    #[serde(rename = "R")]
    pub rate_rpm: f64,
    #[serde(rename = "H")]
    pub hit_rate: f64,
    pub k_dist: BTreeMap<u32, f64>,
    pub mode: AllocationMode,
    pub target: f64,
    pub delta: f64,
    pub n_large: u32,
    pub saturated: bool,
    pub small_profile: String,
    /// The period was empty and the previous plan was kept.
    pub held: bool,
}

/// Stateful monitor owning the PID, the fractional allocation and the
/// small-model escalation state.
#[derive(Debug, Clone)]
pub struct GlobalMonitor {
    cfg: MonitorConfig,
    profiles: ProfileSet,
    mode: AllocationMode,
    workers: u32,
    pid: PidController,
    current: f64,
    small_index: usize,
    saturated_streak: u32,
    clear_streak: u32,
    plan: AllocationPlan,
    ticks: u64,
}

impl GlobalMonitor {
    pub fn new(cfg: MonitorConfig, profiles: ProfileSet, mode: AllocationMode, workers: u32) -> Self {
        let initial = cfg.initial_n_large.unwrap_or(workers).clamp(1, workers);
        let limit = cfg.integral_limit.unwrap_or(f64::from(workers));
        GlobalMonitor {
            pid: PidController::new(cfg.gains, limit),
            cfg,
            profiles,
            mode,
            workers,
            current: f64::from(initial),
            small_index: 0,
            saturated_streak: 0,
            clear_streak: 0,
            plan: AllocationPlan {
                n_large: initial,
                n_small: workers - initial,
                mode,
                saturated: false,
            },
            ticks: 0,
        }
    }

    pub fn plan(&self) -> AllocationPlan {
        self.plan
    }

    pub fn small_index(&self) -> usize {
        self.small_index
    }

    pub fn current(&self) -> f64 {
        self.current
    }

    pub fn config(&self) -> &MonitorConfig {
        &self.cfg
    }

    /// Processes one period. `None` (no arrivals) keeps the previous plan
    /// without touching the controller state.
    pub fn tick(&mut self, snapshot: Option<&MonitorSnapshot>, time_s: f64) -> Result<MonitorDecision> {
        self.ticks += 1;
        let Some(s) = snapshot else {
            return Ok(MonitorDecision {
                tick: self.ticks,
                time_s,
                rate_rpm: 0.0,
                hit_rate: 0.0,
                k_dist: BTreeMap::new(),
                mode: self.mode,
                target: f64::from(self.plan.n_large),
                delta: 0.0,
                n_large: self.plan.n_large,
                saturated: self.plan.saturated,
                small_profile: self.profiles.small[self.small_index].name.clone(),
                held: true,
            });
        };
        let t = self.profiles.total_steps();
        let p_large = self.profiles.large.throughput_rpm();

        // Escalation is decided on the heuristic split with the current small
        // model, before the PID moves anything.
        let heuristic_saturated = {
            let p_small = self.profiles.small[self.small_index].throughput_rpm();
            let raw = match self.mode {
                AllocationMode::Quality => f64::from(quality_allocate(s, t, p_large, p_small)?.n_large),
                AllocationMode::Throughput => throughput_allocate(s, t, p_large, p_small, self.cfg.idle_default)?,
            };
            let n = (raw.clamp(1.0, f64::from(self.workers)).round() as u32).clamp(1, self.workers);
            is_saturated(s, t, p_large, p_small, n)?
        };
        if heuristic_saturated {
            self.saturated_streak += 1;
            self.clear_streak = 0;
        } else {
            self.clear_streak += 1;
            self.saturated_streak = 0;
        }
        let hysteresis = self.cfg.escalation_ticks.max(1);
        if self.saturated_streak >= hysteresis && self.small_index + 1 < self.profiles.small.len() {
            self.small_index += 1;
            self.saturated_streak = 0;
        } else if self.clear_streak >= hysteresis && self.small_index > 0 {
            let prev = self.profiles.small[self.small_index - 1].throughput_rpm();
            let fits = match self.mode {
                AllocationMode::Quality => !quality_allocate(s, t, p_large, prev)?.saturated,
                AllocationMode::Throughput => {
                    let raw = throughput_allocate(s, t, p_large, prev, self.cfg.idle_default)?;
                    let n = (raw.clamp(1.0, f64::from(self.workers)).round() as u32).clamp(1, self.workers);
                    !is_saturated(s, t, p_large, prev, n)?
                }
            };
            if fits {
                self.small_index -= 1;
                self.clear_streak = 0;
            }
        }

        let p_small = self.profiles.small[self.small_index].throughput_rpm();
        let out = monitor_tick(
            s,
            self.mode,
            t,
            p_large,
            p_small,
            &mut self.pid,
            &mut self.current,
            self.cfg.idle_default,
        )?;
        self.plan = out.plan;
        Ok(MonitorDecision {
            tick: self.ticks,
            time_s,
            rate_rpm: s.rate_rpm,
            hit_rate: s.hit_rate,
            k_dist: s.k_dist.clone(),
            mode: self.mode,
            target: out.target,
            delta: out.delta,
            n_large: out.plan.n_large,
            saturated: out.plan.saturated,
            small_profile: self.profiles.small[self.small_index].name.clone(),
            held: false,
        })
    }
}
