//! Global monitor: workload accounting, worker allocation and the PID
//! stabilizer.

mod monitor;
mod pid;
mod plan;
mod profile;
mod snapshot;

pub use monitor::{is_saturated, monitor_tick, GlobalMonitor, MonitorConfig, MonitorDecision, TickOutcome};
pub use pid::{PidController, PidGains};
pub use plan::{
    compute_savings, hit_workload, miss_workload, quality_allocate, refinement_factor, throughput_allocate,
    AllocationMode, AllocationPlan,
};
pub use profile::{ModelClass, ModelProfile, ProfileSet};
pub use snapshot::MonitorSnapshot;
