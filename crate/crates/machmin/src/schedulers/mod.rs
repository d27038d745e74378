//! Online schedulers.
//!
//! Schedulers are passive policies driven by the simulation engine. The
//! engine owns the clock and the remaining work of every alive job; at each
//! event it hands the scheduler the current alive set and asks for a
//! machine assignment. The protocol per event, in order:
//!
//!   1. `advance(to)` - internal clocks move from the last `assign` time
//!      (budgets of parked jobs burn down, nothing else happens here);
//!   2. `arrive(job, alive, now)` once per job released at this instant,
//!      in id order, where `alive` excludes the arriving job;
//!   3. `assign(alive, now)` exactly once, returning machine -> job pairs
//!      that hold verbatim until the next event, or a declared failure.
//!
//! `next_wakeup` reports the earliest scheduler-internal event (e.g. a
//! budget hitting zero); arrivals, completions and deadlines are engine
//! events. A scheduler never learns about jobs that have not arrived:
//! feeding it a prefix of an instance gives bit-identical assignments up to
//! the first divergence point, which is what makes it online.

mod adaptive;
mod cms;
mod doubling;
mod hybrid;
mod policy;

pub use adaptive::{AdaptiveConfig, AdaptiveHybrid};
pub use cms::{CmsScheduler, CmsStep, CmsTraceEntry, CmsTraceJob, sub_cms};
pub use doubling::{DoublingScheduler, LookaheadFn, SchedulerFactory};
pub use hybrid::{HybridConfig, HybridScheduler};
pub use policy::{edf_assignment, sjf_assignment, PolicyScheduler};

use crate::job::{Job, JobId};
use crate::time::TimePoint;
use serde::{Deserialize, Serialize};

/// A job the engine currently considers alive: released, not yet finished.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AliveJob {
    pub job: Job,
    /// Remaining work in work units (not wall time).
    pub remaining: TimePoint,
}

/// Machine -> job pairs, 1-based machine indices, at most one job per
/// machine and one machine per job. Holds until the next event.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Assignment {
    pairs: Vec<(usize, JobId)>,
}

impl Assignment {
    pub fn new(mut pairs: Vec<(usize, JobId)>) -> Assignment {
        pairs.sort_unstable();
        debug_assert!(
            pairs.windows(2).all(|w| w[0].0 != w[1].0),
            "one job per machine"
        );
        Assignment { pairs }
    }

    pub fn empty() -> Assignment {
        Assignment { pairs: Vec::new() }
    }

    pub fn pairs(&self) -> &[(usize, JobId)] {
        &self.pairs
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn job_on(&self, machine: usize) -> Option<JobId> {
        self.pairs
            .iter()
            .find(|&&(m, _)| m == machine)
            .map(|&(_, j)| j)
    }

    pub fn machine_of(&self, job: JobId) -> Option<usize> {
        self.pairs
            .iter()
            .find(|&&(_, j)| j == job)
            .map(|&(m, _)| m)
    }

    /// Shift every machine index by a fixed offset (pool placement).
    pub fn offset(mut self, by: usize) -> Assignment {
        for (m, _) in &mut self.pairs {
            *m += by;
        }
        self
    }

    pub fn merge(mut self, other: Assignment) -> Assignment {
        self.pairs.extend(other.pairs);
        self.pairs.sort_unstable();
        debug_assert!(self.pairs.windows(2).all(|w| w[0].0 != w[1].0));
        self
    }
}

/// A scheduler-declared failure: it cannot proceed within its contract.
/// This is data, not a panic; the caller decides what happens next.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub time: TimePoint,
    pub scheduler: String,
    pub reason: String,
}

pub trait OnlineScheduler {
    /// Human-readable policy name for reports.
    fn name(&self) -> String;

    /// Machines this scheduler currently claims (pool arithmetic; grows for
    /// doubling wrappers, fixed otherwise).
    fn machine_count(&self) -> usize;

    /// Highest machine index the scheduler may touch; differs from
    /// `machine_count` only for CMS, whose extra never-processing machine
    /// reserves an index.
    fn index_span(&self) -> usize {
        self.machine_count()
    }

    /// A new job enters at `now` == its release. `alive` is the current
    /// alive set excluding the new job.
    fn arrive(&mut self, job: &Job, alive: &[AliveJob], now: TimePoint);

    /// Recompute the assignment at `now` for the alive set.
    fn assign(&mut self, alive: &[AliveJob], now: TimePoint) -> Result<Assignment, Failure>;

    /// Earliest internal event strictly after `now`, assuming no arrivals
    /// and ignoring completions (the engine computes those).
    fn next_wakeup(&self, now: TimePoint) -> Option<TimePoint>;

    /// Move internal clocks from the last `assign` time to `to`.
    fn advance(&mut self, to: TimePoint);

    /// Clone into a box: snapshots for lookahead simulation.
    fn clone_box(&self) -> Box<dyn OnlineScheduler>;
}

impl Clone for Box<dyn OnlineScheduler> {
    fn clone(&self) -> Self {
        self.clone_box()
    }
}
