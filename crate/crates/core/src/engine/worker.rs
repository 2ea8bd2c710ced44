use crate::allocator::{ModelClass, ModelProfile, ProfileSet};
use crate::scheduler::Request;

/// Model loaded (or to be loaded) on a worker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Large,
    /// Index into the small-profile escalation list.
    Small(usize),
}

impl Slot {
    pub fn class(self) -> ModelClass {
        match self {
            Slot::Large => ModelClass::Large,
            Slot::Small(_) => ModelClass::Small,
        }
    }

    pub fn profile(self, profiles: &ProfileSet) -> &ModelProfile {
        match self {
            Slot::Large => &profiles.large,
            Slot::Small(i) => &profiles.small[i],
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Job {
    pub request: Request,
    pub dispatch: f64,
    pub classified_at: f64,
}

#[derive(Debug, Clone)]
pub(crate) enum Activity {
    Idle,
    Busy { until: f64, job: Box<Job> },
    Switching { until: f64, to: Slot },
}

/// A worker is idle, busy with one request, or switching models; never two
/// at once.
#[derive(Debug, Clone)]
pub struct Worker {
    pub id: u32,
    pub(crate) loaded: Slot,
    pub(crate) target: Slot,
    pub(crate) activity: Activity,
}

impl Worker {
    pub fn new(id: u32, slot: Slot) -> Self {
        Worker {
            id,
            loaded: slot,
            target: slot,
            activity: Activity::Idle,
        }
    }

    pub fn loaded(&self) -> Slot {
        self.loaded
    }

    /// Model the worker will serve once pending switches finish.
    pub fn target(&self) -> Slot {
        self.target
    }

    pub fn is_idle(&self) -> bool {
        matches!(self.activity, Activity::Idle)
    }

    pub fn busy_until(&self) -> Option<f64> {
        match self.activity {
            Activity::Busy { until, .. } => Some(until),
            _ => None,
        }
    }

    pub fn switching_until(&self) -> Option<f64> {
        match self.activity {
            Activity::Switching { until, .. } => Some(until),
            _ => None,
        }
    }

    fn rank(&self) -> u8 {
        match self.activity {
            Activity::Idle => 0,
            Activity::Switching { .. } => 1,
            Activity::Busy { .. } => 2,
        }
    }
}

/// Retargets the fewest workers needed to have `n_large` large workers and
/// every other worker on small profile `small`. Idle workers, and workers
/// that already hold the new model, are picked first. Returns the ids of
/// the retargeted workers; each switches once its current job is done.
pub fn apply_allocation(n_large: u32, small: usize, workers: &mut [Worker]) -> Vec<u32> {
    let mut changed = Vec::new();
    let have = workers.iter().filter(|w| w.target == Slot::Large).count();
    let want = n_large as usize;
    let mut retarget = |from_large: bool, to: Slot, count: usize, workers: &mut [Worker]| {
        let mut picks: Vec<usize> = (0..workers.len())
            .filter(|&i| (workers[i].target == Slot::Large) == from_large)
            .collect();
        picks.sort_by_key(|&i| (workers[i].loaded != to, workers[i].rank(), workers[i].id));
        for &i in picks.iter().take(count) {
            workers[i].target = to;
            changed.push(workers[i].id);
        }
    };
    if want > have {
        retarget(false, Slot::Large, want - have, workers);
    } else if have > want {
        retarget(true, Slot::Small(small), have - want, workers);
    }
    for w in workers.iter_mut() {
        if let Slot::Small(i) = w.target {
            if i != small {
                w.target = Slot::Small(small);
                if !changed.contains(&w.id) {
                    changed.push(w.id);
                }
            }
        }
    }
    changed.sort_unstable();
    changed
}
