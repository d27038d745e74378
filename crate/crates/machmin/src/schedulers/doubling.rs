//! Pool-doubling wrapper around any cloneable scheduler.
//!
//! Machines are claimed in pools of geometrically growing width: the k-th
//! pool has 2^(k-1) machines, so after opening k pools the wrapper holds
//! 2^k - 1 in total. Every arriving job is tested against the currently
//! open pool with an admission probe: "would this pool, as it stands plus
//! the new job, finish everything on time if nothing else ever arrived?"
//! On a pass the job joins the open pool; on a failure the wrapper opens
//! the next, twice-as-wide pool and the job joins it unconditionally (a
//! fresh pool has no backlog, and extra machines never help a single job,
//! so probing it would change nothing). Job-to-pool placement is frozen at
//! arrival.
//!
//! The probe itself is injected (`LookaheadFn`) so this module stays
//! independent of the simulation engine that implements it; pools draw
//! their machine indices from a shared monotone allocator so several
//! wrappers can coexist with disjoint, deterministic global indices.

use super::{AliveJob, Assignment, Failure, OnlineScheduler};
use crate::job::{Job, JobId};
use crate::time::{Rat, TimePoint};
use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

/// Admission probe: scheduler snapshot (already told about every job in the
/// alive list), the alive jobs with their remaining work, the current time
/// and the machine speed; answers whether everything finishes on time.
pub type LookaheadFn =
    dyn Fn(Box<dyn OnlineScheduler>, Vec<AliveJob>, TimePoint, Rat) -> bool + Send + Sync;

/// Builds the inner scheduler for a pool of the given width. The inner
/// scheduler works in local machine indices 1..=index_span.
pub type SchedulerFactory = dyn Fn(usize) -> Box<dyn OnlineScheduler> + Send + Sync;

struct Pool {
    inner: Box<dyn OnlineScheduler>,
    width: usize,
    /// Global index of the machine just before this pool's block: the
    /// pool's local machine i is global machine base + i.
    base: usize,
    jobs: BTreeSet<JobId>,
    opened_at: TimePoint,
}

impl Clone for Pool {
    fn clone(&self) -> Pool {
        Pool {
            inner: self.inner.clone_box(),
            width: self.width,
            base: self.base,
            jobs: self.jobs.clone(),
            opened_at: self.opened_at,
        }
    }
}

/// Read-only view of one pool, for reporting and tests.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PoolInfo {
    pub width: usize,
    pub first_machine: usize,
    pub jobs: Vec<JobId>,
    pub opened_at: TimePoint,
}

pub struct DoublingScheduler {
    label: String,
    factory: Arc<SchedulerFactory>,
    lookahead: Arc<LookaheadFn>,
    speed: Rat,
    allocator: Arc<AtomicUsize>,
    pools: Vec<Pool>,
}

impl Clone for DoublingScheduler {
    fn clone(&self) -> DoublingScheduler {
        DoublingScheduler {
            label: self.label.clone(),
            factory: Arc::clone(&self.factory),
            lookahead: Arc::clone(&self.lookahead),
            speed: self.speed,
            allocator: Arc::clone(&self.allocator),
            pools: self.pools.clone(),
        }
    }
}

impl DoublingScheduler {
    /// A wrapper that owns its machine indices starting from 1.
    pub fn new(
        label: impl Into<String>,
        factory: Arc<SchedulerFactory>,
        lookahead: Arc<LookaheadFn>,
        speed: Rat,
    ) -> DoublingScheduler {
        Self::with_allocator(label, factory, lookahead, speed, Arc::new(AtomicUsize::new(0)))
    }

    /// A wrapper drawing machine indices from a shared allocator, so that
    /// several wrappers emit disjoint global indices.
    pub fn with_allocator(
        label: impl Into<String>,
        factory: Arc<SchedulerFactory>,
        lookahead: Arc<LookaheadFn>,
        speed: Rat,
        allocator: Arc<AtomicUsize>,
    ) -> DoublingScheduler {
        DoublingScheduler {
            label: label.into(),
            factory,
            lookahead,
            speed,
            allocator,
            pools: Vec::new(),
        }
    }

    pub fn pools(&self) -> Vec<PoolInfo> {
        self.pools
            .iter()
            .map(|p| PoolInfo {
                width: p.width,
                first_machine: p.base + 1,
                jobs: p.jobs.iter().copied().collect(),
                opened_at: p.opened_at,
            })
            .collect()
    }

    /// Jobs currently alive that belong to the given pool, in engine order.
    fn pool_alive(pool: &Pool, alive: &[AliveJob]) -> Vec<AliveJob> {
        alive
            .iter()
            .filter(|a| pool.jobs.contains(&a.job.id))
            .copied()
            .collect()
    }

    fn open_pool(&mut self, now: TimePoint) -> &mut Pool {
        let width = self.pools.last().map_or(1, |p| p.width * 2);
        let inner = (self.factory)(width);
        debug_assert_eq!(inner.machine_count(), width);
        let base = self.allocator.fetch_add(inner.index_span(), Ordering::SeqCst);
        self.pools.push(Pool {
            inner,
            width,
            base,
            jobs: BTreeSet::new(),
            opened_at: now,
        });
        self.pools.last_mut().unwrap()
    }

    fn admits(&self, pool: &Pool, job: &Job, alive: &[AliveJob], now: TimePoint) -> bool {
        let pool_alive = Self::pool_alive(pool, alive);
        let mut snapshot = pool.inner.clone_box();
        snapshot.arrive(job, &pool_alive, now);
        let mut probe_alive = pool_alive;
        probe_alive.push(AliveJob {
            job: *job,
            remaining: job.size(),
        });
        (self.lookahead)(snapshot, probe_alive, now, self.speed)
    }
}

impl OnlineScheduler for DoublingScheduler {
    fn name(&self) -> String {
        format!("doubling[{}]", self.label)
    }

    fn machine_count(&self) -> usize {
        self.pools.iter().map(|p| p.inner.machine_count()).sum()
    }

    fn index_span(&self) -> usize {
        self.pools
            .iter()
            .map(|p| p.base + p.inner.index_span())
            .max()
            .unwrap_or(0)
    }

    fn arrive(&mut self, job: &Job, alive: &[AliveJob], now: TimePoint) {
        let take_open = match self.pools.last() {
            Some(open) => self.admits(open, job, alive, now),
            None => false,
        };
        if take_open {
            let pool = self.pools.last_mut().unwrap();
            let pool_alive = Self::pool_alive(pool, alive);
            pool.inner.arrive(job, &pool_alive, now);
            pool.jobs.insert(job.id);
        } else {
            let pool = self.open_pool(now);
            pool.inner.arrive(job, &[], now);
            pool.jobs.insert(job.id);
        }
    }

    fn assign(&mut self, alive: &[AliveJob], now: TimePoint) -> Result<Assignment, Failure> {
        let mut merged = Assignment::empty();
        for pool in &mut self.pools {
            let pool_alive = Self::pool_alive(pool, alive);
            let local = pool.inner.assign(&pool_alive, now)?;
            merged = merged.merge(local.offset(pool.base));
        }
        Ok(merged)
    }

    fn next_wakeup(&self, now: TimePoint) -> Option<TimePoint> {
        self.pools
            .iter()
            .filter_map(|p| p.inner.next_wakeup(now))
            .min()
    }

    fn advance(&mut self, to: TimePoint) {
        for pool in &mut self.pools {
            pool.inner.advance(to);
        }
    }

    fn clone_box(&self) -> Box<dyn OnlineScheduler> {
        Box::new(self.clone())
    }
}
