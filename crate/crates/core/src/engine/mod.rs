//! Deterministic discrete-event simulation of the serving cluster.
//!
//! Events at the same instant run in a fixed order (completions, then
//! finished model switches, then monitor ticks, then arrivals) and then by
//! insertion sequence, so a run is a pure function of config and trace.

mod config;
mod worker;

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};

pub use config::{CacheConfig, SimConfig};
pub use worker::{apply_allocation, Slot, Worker};

use worker::{Activity, Job};

use crate::allocator::{AllocationPlan, GlobalMonitor, ModelClass, ModelProfile, MonitorDecision, MonitorSnapshot};
use crate::cache::{CachePolicy, SemanticCache};
use crate::error::{Error, Result};
use crate::metrics::{check_invariants, MetricsReport, ReportContext, RequestOutcome, TickSample};
use crate::scheduler::{self, Classification, DispatchPolicy, QueuePair, Request, RetrievalKey};
use crate::workload::{ImageModel, TraceRecord};

/// Seconds to serve a request skipping `k` steps (`None` for a miss) on
/// `profile`.
pub fn service_time(k: Option<u32>, profile: &ModelProfile, overhead_s: f64) -> f64 {
    f64::from(profile.total_steps.saturating_sub(k.unwrap_or(0))) * profile.per_step_latency_s + overhead_s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Kind {
    Completion,
    SwitchDone,
    MonitorTick,
    Arrival,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    kind: Kind,
    seq: u64,
    /// Worker index or release index, depending on `kind`.
    target: usize,
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.kind.cmp(&other.kind))
            .then(self.seq.cmp(&other.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub report: MetricsReport,
    pub series: Vec<TickSample>,
    pub decisions: Vec<MonitorDecision>,
    pub outcomes: Vec<RequestOutcome>,
}

#[derive(Default)]
struct Period {
    arrivals: u64,
    hits_by_k: BTreeMap<u32, u64>,
    completions: u64,
}

struct Sim<'a> {
    cfg: &'a SimConfig,
    images: &'a ImageModel,
    trace: &'a [TraceRecord],
    /// (trace index, release time) of every served request.
    releases: Vec<(usize, f64)>,
    next_release: usize,
    arrival_pending: bool,
    now: f64,
    seq: u64,
    events: BinaryHeap<Reverse<Event>>,
    workers: Vec<Worker>,
    queues: QueuePair,
    cache: Option<SemanticCache>,
    monitor: Option<GlobalMonitor>,
    plan: AllocationPlan,
    policy: DispatchPolicy,
    period: Period,
    outcomes: Vec<RequestOutcome>,
    series: Vec<TickSample>,
    decisions: Vec<MonitorDecision>,
    switches: u64,
}

/// Runs the trace through the configured cluster. The first
/// `warmup_requests` records only seed the cache.
pub fn run(cfg: &SimConfig, trace: &[TraceRecord], images: &ImageModel) -> Result<SimOutput> {
    cfg.validate()?;
    let mut sim = Sim::new(cfg, trace, images)?;
    sim.warm_up()?;
    sim.event_loop()?;
    sim.finish()
}

impl<'a> Sim<'a> {
    fn new(cfg: &'a SimConfig, trace: &'a [TraceRecord], images: &'a ImageModel) -> Result<Self> {
        let n = cfg.workers;
        let warm = cfg.warmup_requests.min(trace.len());
        let measured = &trace[warm..];
        let mut releases: Vec<(usize, f64)> = match cfg.release_rate_rpm {
            None if cfg.outstanding.is_some() => {
                let t0 = measured.first().map_or(0.0, TraceRecord::arrival_s);
                (0..measured.len()).map(|i| (warm + i, t0)).collect()
            }
            None => measured
                .iter()
                .enumerate()
                .map(|(i, r)| (warm + i, r.arrival_s()))
                .collect(),
            Some(rate) => {
                let t0 = measured.first().map_or(0.0, TraceRecord::arrival_s);
                (0..measured.len())
                    .map(|i| (warm + i, t0 + i as f64 * 60.0 / rate))
                    .collect()
            }
        };
        if let Some(d) = cfg.duration_s {
            releases.retain(|&(_, t)| t <= d);
        }

        let monitor = match cfg.static_n_large {
            Some(_) => None,
            None => Some(GlobalMonitor::new(
                cfg.monitor.clone(),
                cfg.profiles.clone(),
                cfg.mode,
                n,
            )),
        };
        let plan = match (&monitor, cfg.static_n_large) {
            (Some(m), _) => m.plan(),
            (None, Some(l)) => AllocationPlan {
                n_large: l,
                n_small: n - l,
                mode: cfg.mode,
                saturated: false,
            },
            (None, None) => unreachable!("static or dynamic"),
        };
        let workers = (0..n)
            .map(|i| Worker::new(i, if i < plan.n_large { Slot::Large } else { Slot::Small(0) }))
            .collect();
        let cache = match cfg.cache.policy {
            CachePolicy::Disabled => None,
            policy => Some(SemanticCache::new(cfg.cache.capacity, policy)?.with_max_age(cfg.cache.max_age_s)),
        };
        Ok(Sim {
            cfg,
            images,
            trace,
            releases,
            next_release: 0,
            arrival_pending: false,
            now: 0.0,
            seq: 0,
            events: BinaryHeap::new(),
            workers,
            queues: QueuePair::default(),
            cache,
            monitor,
            plan,
            policy: DispatchPolicy::for_mode(cfg.mode, cfg.work_conservation),
            period: Period::default(),
            outcomes: Vec::new(),
            series: Vec::new(),
            decisions: Vec::new(),
            switches: 0,
        })
    }

    fn push(&mut self, time: f64, kind: Kind, target: usize) {
        self.seq += 1;
        self.events.push(Reverse(Event {
            time,
            kind,
            seq: self.seq,
            target,
        }));
    }

    fn warm_up(&mut self) -> Result<()> {
        let warm = self.cfg.warmup_requests.min(self.trace.len());
        let Some(cache) = self.cache.as_mut() else {
            return Ok(());
        };
        for (i, r) in self.trace[..warm].iter().enumerate() {
            let stored = match self.cfg.cache.key {
                RetrievalKey::Image => self.images.generate(i as u64, &r.embedding),
                RetrievalKey::Text => r.embedding.clone(),
            };
            cache.insert(i as u64, stored, ModelClass::Large, r.arrival_s())?;
        }
        Ok(())
    }

    fn event_loop(&mut self) -> Result<()> {
        let Some(&(_, first)) = self.releases.first() else {
            return Ok(());
        };
        self.now = first;
        self.push(first, Kind::Arrival, 0);
        self.arrival_pending = true;
        self.push(first + self.cfg.monitor.period_s, Kind::MonitorTick, 0);
        while let Some(Reverse(ev)) = self.events.pop() {
            self.now = ev.time;
            match ev.kind {
                Kind::Arrival => self.on_arrival(ev.target)?,
                Kind::Completion => self.on_completion(ev.target)?,
                Kind::SwitchDone => self.on_switch_done(ev.target),
                Kind::MonitorTick => self.on_tick()?,
            }
            self.dispatch_all()?;
        }
        Ok(())
    }

    fn on_arrival(&mut self, release: usize) -> Result<()> {
        let (index, _) = self.releases[release];
        let rec = &self.trace[index];
        let mut req = Request::new(index as u64, rec.id.clone(), self.now, rec.embedding.clone());
        if let Some(cache) = self.cache.as_mut() {
            cache.expire(self.now);
        }
        let c = scheduler::classify(&mut req, self.cache.as_ref(), &self.cfg.cache.thresholds)?;
        self.period.arrivals += 1;
        if let Some(k) = c.k() {
            *self.period.hits_by_k.entry(k).or_insert(0) += 1;
        }
        self.queues.push(req)?;
        self.next_release = release + 1;
        self.arrival_pending = false;
        self.schedule_next_arrival();
        Ok(())
    }

    /// Queues the next release: at its precomputed time for open-loop load,
    /// or now when a closed-loop run has room for another request.
    fn schedule_next_arrival(&mut self) {
        if self.arrival_pending || self.next_release >= self.releases.len() {
            return;
        }
        let t = match self.cfg.outstanding {
            None => self.releases[self.next_release].1,
            Some(limit) => {
                if self.next_release - self.outcomes.len() >= limit {
                    return;
                }
                if self.cfg.duration_s.is_some_and(|d| self.now > d) {
                    self.releases.truncate(self.next_release);
                    return;
                }
                self.releases[self.next_release].1 = self.now;
                self.now
            }
        };
        self.arrival_pending = true;
        self.push(t, Kind::Arrival, self.next_release);
    }

    fn on_completion(&mut self, w: usize) -> Result<()> {
        let Activity::Busy { job, .. } = std::mem::replace(&mut self.workers[w].activity, Activity::Idle) else {
            return Err(Error::Invariant(format!("completion on non-busy worker {w}")));
        };
        let Job {
            mut request,
            dispatch,
            classified_at,
        } = *job;
        request.finish()?;
        let slot = self.workers[w].loaded;
        let profile = slot.profile(&self.cfg.profiles);
        let k = request.classification.k();
        let steps = profile.total_steps - k.unwrap_or(0);
        let (similarity, source_age_s) = match &request.classification {
            Classification::Hit {
                similarity,
                source_inserted_at,
                ..
            } => (Some(*similarity), Some(classified_at - source_inserted_at)),
            Classification::Miss => (None, None),
        };
        self.outcomes.push(RequestOutcome {
            id: request.id,
            name: request.name.clone(),
            arrival: request.arrival,
            dispatch,
            completion: self.now,
            k,
            similarity,
            source_age_s,
            serving_model: profile.name.clone(),
            serving_class: slot.class(),
            worker: self.workers[w].id,
            steps_executed: steps,
            energy_j: f64::from(steps) * profile.per_step_energy_j,
        });
        self.period.completions += 1;
        if let Some(cache) = self.cache.as_mut() {
            let image = self.images.generate(request.id, &request.query);
            scheduler::on_completion(&request, &image, slot.class(), self.now, cache, self.cfg.cache.key)?;
        }
        self.start_switch_if_needed(w);
        self.schedule_next_arrival();
        Ok(())
    }

    fn on_switch_done(&mut self, w: usize) {
        if let Activity::Switching { to, .. } = self.workers[w].activity {
            self.workers[w].loaded = to;
            self.workers[w].activity = Activity::Idle;
        }
        self.start_switch_if_needed(w);
    }

    fn start_switch_if_needed(&mut self, w: usize) {
        let worker = &mut self.workers[w];
        if worker.is_idle() && worker.loaded != worker.target {
            let to = worker.target;
            let until = self.now + to.profile(&self.cfg.profiles).switch_latency_s;
            worker.activity = Activity::Switching { until, to };
            self.switches += 1;
            self.push(until, Kind::SwitchDone, w);
        }
    }

    fn on_tick(&mut self) -> Result<()> {
        let period = std::mem::take(&mut self.period);
        let n = self.cfg.workers;
        let period_s = self.cfg.monitor.period_s;
        if let Some(monitor) = self.monitor.as_mut() {
            let snapshot = MonitorSnapshot::from_counts(period.arrivals, &period.hits_by_k, period_s, n);
            let decision = monitor.tick(snapshot.as_ref(), self.now)?;
            self.plan = monitor.plan();
            let small = monitor.small_index();
            self.decisions.push(decision);
            apply_allocation(self.plan.n_large, small, &mut self.workers);
            for w in 0..self.workers.len() {
                self.start_switch_if_needed(w);
            }
        }
        let hits: u64 = period.hits_by_k.values().sum();
        let small = self.monitor.as_ref().map_or(0, GlobalMonitor::small_index);
        self.series.push(TickSample {
            time_s: self.now,
            hit_queue: self.queues.hit_len(),
            miss_queue: self.queues.miss_len(),
            n_large: self.plan.n_large,
            n_small: self.plan.n_small,
            arrivals: period.arrivals,
            completions: period.completions,
            throughput_rpm: period.completions as f64 * 60.0 / period_s,
            hit_rate: if period.arrivals == 0 {
                0.0
            } else {
                hits as f64 / period.arrivals as f64
            },
            small_profile: self.cfg.profiles.small[small].name.clone(),
            saturated: self.plan.saturated,
        });
        let pending = self.next_release < self.releases.len()
            || !self.queues.is_empty()
            || self.workers.iter().any(|w| !w.is_idle());
        if pending {
            self.push(self.now + period_s, Kind::MonitorTick, 0);
        }
        Ok(())
    }

    /// Hands queued work to every idle worker whose model is settled, in
    /// worker order.
    fn dispatch_all(&mut self) -> Result<()> {
        for w in 0..self.workers.len() {
            let worker = &self.workers[w];
            if !worker.is_idle() || worker.loaded != worker.target {
                continue;
            }
            let slot = worker.loaded;
            let Some(mut request) = scheduler::dispatch(slot.class(), &mut self.queues, self.policy) else {
                continue;
            };
            let mut classified_at = request.arrival;
            if self.cfg.reclassify_on_dispatch && slot == Slot::Large && !request.classification.is_hit() {
                if let Some(cache) = self.cache.as_mut() {
                    cache.expire(self.now);
                }
                scheduler::classify(&mut request, self.cache.as_ref(), &self.cfg.cache.thresholds)?;
                classified_at = self.now;
            }
            request.start()?;
            let profile = slot.profile(&self.cfg.profiles);
            let until = self.now + service_time(request.classification.k(), profile, self.cfg.overhead_s);
            self.workers[w].activity = Activity::Busy {
                until,
                job: Box::new(Job {
                    request,
                    dispatch: self.now,
                    classified_at,
                }),
            };
            self.push(until, Kind::Completion, w);
        }
        Ok(())
    }

    fn finish(self) -> Result<SimOutput> {
        if self.outcomes.len() != self.releases.len() || !self.queues.is_empty() {
            return Err(Error::Invariant(format!(
                "{} requests released but {} completed",
                self.releases.len(),
                self.outcomes.len()
            )));
        }
        let t = self.cfg.profiles.total_steps();
        let ctx = ReportContext {
            l_ref_s: self.cfg.l_ref_s(),
            slo_multipliers: self.cfg.slo_multipliers.clone(),
            large_step_energy_j: self.cfg.profiles.large.per_step_energy_j,
            total_steps: t,
            switches: self.switches,
            warmup_requests: self.cfg.warmup_requests.min(self.trace.len()) as u64,
        };
        let mut outcomes = self.outcomes;
        outcomes.sort_by_key(|o| o.id);
        let report = MetricsReport::from_outcomes(&outcomes, &ctx);
        check_invariants(&report, &outcomes, t)?;
        Ok(SimOutput {
            report,
            series: self.series,
            decisions: self.decisions,
            outcomes,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocator::{AllocationMode, ModelProfile, PidGains, ProfileSet};
    use crate::cache::{Embedding, ThresholdTable};

    fn profiles(large: f64, small: f64) -> ProfileSet {
        ProfileSet {
            large: ModelProfile::new("L", ModelClass::Large, large, 2.0),
            small: vec![ModelProfile::new("S", ModelClass::Small, small, 1.0)],
        }
    }

    fn record(i: usize, t_ms: u64, e: &Embedding) -> TraceRecord {
        TraceRecord {
            id: format!("r{i}"),
            arrival_ms: t_ms,
            embedding: e.clone(),
            cluster: None,
        }
    }

    fn axis(dim: usize, i: usize) -> Embedding {
        let mut v = vec![0.0f32; dim];
        v[i] = 1.0;
        Embedding::from_unit(v).unwrap()
    }

    #[test]
    fn service_time_examples() {
        let large = ModelProfile::new("L", ModelClass::Large, 0.4, 1.0);
        assert!((service_time(None, &large, 1.0) - 21.0).abs() < 1e-12);
        let small = ModelProfile::new("S", ModelClass::Small, 0.1, 1.0);
        assert!((service_time(Some(30), &small, 1.0) - 3.0).abs() < 1e-12);
        assert_eq!(service_time(Some(0), &large, 1.0), service_time(None, &large, 1.0));
    }

    #[test]
    fn event_order_breaks_ties_by_kind_then_seq() {
        let e = |time, kind, seq| Event {
            time,
            kind,
            seq,
            target: 0,
        };
        let mut heap: BinaryHeap<Reverse<Event>> = [
            e(1.0, Kind::Arrival, 1),
            e(1.0, Kind::MonitorTick, 2),
            e(1.0, Kind::SwitchDone, 3),
            e(1.0, Kind::Completion, 5),
            e(1.0, Kind::Completion, 4),
            e(0.5, Kind::Arrival, 6),
        ]
        .into_iter()
        .map(Reverse)
        .collect();
        let order: Vec<u64> = std::iter::from_fn(|| heap.pop().map(|r| r.0.seq)).collect();
        assert_eq!(order, vec![6, 4, 5, 3, 2, 1]);
    }

    fn vanilla(workers: u32) -> SimConfig {
        SimConfig {
            workers,
            profiles: profiles(0.4, 0.1),
            static_n_large: Some(workers),
            cache: CacheConfig {
                policy: CachePolicy::Disabled,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn spaced_arrivals_never_queue() {
        let e = axis(4, 0);
        let trace: Vec<_> = (0..20).map(|i| record(i, i as u64 * 30_000, &e)).collect();
        let out = run(&vanilla(1), &trace, &ImageModel { beta: 1.0, seed: 0 }).unwrap();
        assert!(out.outcomes.iter().all(|o| o.dispatch == o.arrival));
        assert!(out.outcomes.iter().all(|o| (o.latency() - 21.0).abs() < 1e-9));
        assert_eq!(out.report.hit_rate, 0.0);
    }

    #[test]
    fn saturated_vanilla_matches_capacity() {
        let e = axis(4, 0);
        let trace: Vec<_> = (0..400).map(|i| record(i, i as u64, &e)).collect();
        let cfg = SimConfig {
            release_rate_rpm: Some(1000.0),
            ..vanilla(4)
        };
        let out = run(&cfg, &trace, &ImageModel { beta: 1.0, seed: 0 }).unwrap();
        let capacity = 4.0 * cfg.profiles.large.throughput_rpm();
        let rel = (out.report.throughput_rpm - capacity).abs() / capacity;
        assert!(rel < 0.06, "{} vs {capacity}", out.report.throughput_rpm);
        let with_overhead = cfg.vanilla_capacity_rpm();
        assert!((out.report.throughput_rpm - with_overhead).abs() / with_overhead < 0.01);
    }

    #[test]
    fn all_hits_in_throughput_mode_run_on_small() {
        // beta = 1 makes each cached image equal its query, so repeats hit at k = 30.
        let e = axis(4, 1);
        let trace: Vec<_> = (0..300).map(|i| record(i, i as u64 * 2000, &e)).collect();
        let cfg = SimConfig {
            workers: 4,
            profiles: profiles(0.4, 0.1),
            mode: AllocationMode::Throughput,
            warmup_requests: 1,
            work_conservation: false,
            ..Default::default()
        };
        let out = run(&cfg, &trace, &ImageModel { beta: 1.0, seed: 0 }).unwrap();
        assert_eq!(out.report.hit_rate, 1.0);
        // Before the first tick every worker is large; afterwards hits only
        // reach small workers.
        let first_tick = out.decisions[0].time_s;
        assert!(out
            .outcomes
            .iter()
            .filter(|o| o.dispatch > first_tick)
            .all(|o| o.serving_class == ModelClass::Small));
        assert!(out.outcomes.iter().all(|o| o.k == Some(30)));
    }

    #[test]
    fn same_inputs_same_report() {
        let cfg = crate::workload::GeneratorConfig {
            dim: 32,
            n_clusters: 8,
            rate_schedule: vec![crate::workload::RateSegment {
                duration_s: 1800.0,
                rate_rpm: 6.0,
            }],
            ..Default::default()
        };
        let trace = crate::workload::generate_trace(&cfg).unwrap();
        let sim = SimConfig {
            mode: AllocationMode::Throughput,
            ..Default::default()
        };
        let a = run(&sim, &trace, &cfg.image_model()).unwrap();
        let b = run(&sim, &trace, &cfg.image_model()).unwrap();
        assert_eq!(
            serde_json::to_string(&a.report).unwrap(),
            serde_json::to_string(&b.report).unwrap()
        );
        assert_eq!(a.outcomes, b.outcomes);
    }

    #[test]
    fn every_request_completes_once() {
        let cfg = crate::workload::GeneratorConfig {
            dim: 16,
            n_clusters: 4,
            rate_schedule: vec![crate::workload::RateSegment {
                duration_s: 3600.0,
                rate_rpm: 20.0,
            }],
            ..Default::default()
        };
        let trace = crate::workload::generate_trace(&cfg).unwrap();
        let sim = SimConfig {
            mode: AllocationMode::Quality,
            cache: CacheConfig {
                thresholds: ThresholdTable::default(),
                ..Default::default()
            },
            ..Default::default()
        };
        let out = run(&sim, &trace, &cfg.image_model()).unwrap();
        let mut ids: Vec<u64> = out.outcomes.iter().map(|o| o.id).collect();
        ids.dedup();
        assert_eq!(ids.len(), trace.len());
    }

    #[test]
    fn switch_latency_delays_service() {
        let e = axis(4, 2);
        let trace: Vec<_> = (0..200).map(|i| record(i, i as u64 * 5000, &e)).collect();
        let mut p = profiles(0.4, 0.1);
        p.small[0].switch_latency_s = 30.0;
        let cfg = SimConfig {
            workers: 4,
            profiles: p,
            mode: AllocationMode::Throughput,
            warmup_requests: 1,
            monitor: crate::allocator::MonitorConfig {
                gains: PidGains::ZERO,
                ..Default::default()
            },
            ..Default::default()
        };
        let out = run(&cfg, &trace, &ImageModel { beta: 1.0, seed: 0 }).unwrap();
        assert!(out.report.switches > 0);
        let first_small = out
            .outcomes
            .iter()
            .filter(|o| o.serving_class == ModelClass::Small)
            .map(|o| o.dispatch)
            .fold(f64::INFINITY, f64::min);
        assert!(first_small >= out.decisions[0].time_s + 30.0);
    }

    #[test]
    fn zero_switch_latency_switches_at_once() {
        let e = axis(4, 2);
        let trace: Vec<_> = (0..200).map(|i| record(i, i as u64 * 5000, &e)).collect();
        let cfg = SimConfig {
            workers: 4,
            profiles: profiles(0.4, 0.1),
            mode: AllocationMode::Throughput,
            warmup_requests: 1,
            ..Default::default()
        };
        let out = run(&cfg, &trace, &ImageModel { beta: 1.0, seed: 0 }).unwrap();
        let tick = out.decisions[0].time_s;
        let first_small = out
            .outcomes
            .iter()
            .find(|o| o.serving_class == ModelClass::Small)
            .unwrap();
        assert!(first_small.dispatch >= tick);
        assert_eq!(first_small.dispatch, first_small.arrival);
    }

    #[test]
    fn duration_cuts_releases() {
        let e = axis(4, 0);
        let trace: Vec<_> = (0..10).map(|i| record(i, i as u64 * 60_000, &e)).collect();
        let cfg = SimConfig {
            duration_s: Some(250.0),
            ..vanilla(2)
        };
        let out = run(&cfg, &trace, &ImageModel { beta: 1.0, seed: 0 }).unwrap();
        assert_eq!(out.report.requests, 5);
    }

    #[test]
    fn closed_loop_keeps_outstanding_bounded() {
        let e = axis(4, 0);
        let trace: Vec<_> = (0..12).map(|i| record(i, i as u64 * 1_000, &e)).collect();
        let cfg = SimConfig {
            outstanding: Some(3),
            ..vanilla(2)
        };
        let out = run(&cfg, &trace, &ImageModel { beta: 1.0, seed: 0 }).unwrap();
        assert_eq!(out.report.requests, 12);
        for o in &out.outcomes {
            let in_system = out
                .outcomes
                .iter()
                .filter(|p| p.arrival <= o.arrival && p.completion > o.arrival)
                .count();
            assert!(in_system <= 3, "{in_system} in system at {}", o.arrival);
        }
        // two workers never idle: 12 requests of 21 s each
        assert!(
            (out.report.makespan_s - 6.0 * 21.0).abs() < 1e-9,
            "{}",
            out.report.makespan_s
        );
        let both = SimConfig {
            release_rate_rpm: Some(10.0),
            ..cfg
        };
        assert!(both.validate().is_err());
    }
}
