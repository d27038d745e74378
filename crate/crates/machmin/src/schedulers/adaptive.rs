//! Hybrid scheduler for an unknown machine target.
//!
//! Works like the fixed-fleet hybrid, but the target is a running estimate
//! instead of an input. Each routing class (deadline-driven, one per laxity
//! bucket, budgeted) is served by its own pool-doubling sub-run, created
//! lazily when the first job routes there; all sub-runs draw machine
//! indices from one shared allocator, so global indices are contiguous and
//! deterministic in arrival order.
//!
//! The estimate starts at 4 and doubles whenever some sub-run has opened
//! more than 4 * c_X * estimate machines - the pool-doubling wrapper opens
//! fewer than four times what its policy needs, so exceeding that bound for
//! a fleet of c_X * estimate is proof the estimate is too small. Growing
//! the estimate re-routes future arrivals only: the class a job landed in
//! is frozen, exactly like pool membership inside each sub-run.

use super::doubling::{DoublingScheduler, LookaheadFn, SchedulerFactory};
use super::{AliveJob, Assignment, CmsScheduler, Failure, OnlineScheduler, PolicyScheduler};
use crate::job::{Job, JobId};
use crate::route::{route, Route};
use crate::time::{Rat, TimePoint};
use std::collections::BTreeMap;
use std::sync::atomic::AtomicUsize;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AdaptiveConfig {
    /// Starting machine-target estimate.
    pub initial: u32,
    pub c_edf: usize,
    pub c_sjf: usize,
    pub c_cms: usize,
}

impl Default for AdaptiveConfig {
    fn default() -> AdaptiveConfig {
        AdaptiveConfig {
            initial: 4,
            c_edf: 16,
            c_sjf: 8,
            c_cms: 8,
        }
    }
}

impl AdaptiveConfig {
    fn class_width(&self, route: Route) -> usize {
        match route {
            Route::Edf => self.c_edf,
            Route::Sjf(_) => self.c_sjf,
            Route::Cms => self.c_cms,
        }
    }
}

pub struct AdaptiveHybrid {
    config: AdaptiveConfig,
    lookahead: Arc<LookaheadFn>,
    speed: Rat,
    estimate: u32,
    /// (time, new value) per growth step, newest last.
    estimate_history: Vec<(TimePoint, u32)>,
    allocator: Arc<AtomicUsize>,
    subs: BTreeMap<Route, DoublingScheduler>,
    routes: BTreeMap<JobId, Route>,
}

impl Clone for AdaptiveHybrid {
    fn clone(&self) -> AdaptiveHybrid {
        AdaptiveHybrid {
            config: self.config,
            lookahead: Arc::clone(&self.lookahead),
            speed: self.speed,
            estimate: self.estimate,
            estimate_history: self.estimate_history.clone(),
            allocator: Arc::clone(&self.allocator),
            subs: self.subs.clone(),
            routes: self.routes.clone(),
        }
    }
}

impl AdaptiveHybrid {
    pub fn new(config: AdaptiveConfig, lookahead: Arc<LookaheadFn>, speed: Rat) -> AdaptiveHybrid {
        assert!(config.initial >= 1);
        AdaptiveHybrid {
            config,
            lookahead,
            speed,
            estimate: config.initial,
            estimate_history: Vec::new(),
            allocator: Arc::new(AtomicUsize::new(0)),
            subs: BTreeMap::new(),
            routes: BTreeMap::new(),
        }
    }

    /// Current machine-target estimate.
    pub fn estimate(&self) -> u32 {
        self.estimate
    }

    /// Growth steps taken so far: (time, new estimate).
    pub fn estimate_history(&self) -> &[(TimePoint, u32)] {
        &self.estimate_history
    }

    /// The class a job was routed to at arrival.
    pub fn route_of(&self, job: JobId) -> Option<Route> {
        self.routes.get(&job).copied()
    }

    /// Machines opened per class, in class order.
    pub fn open_by_class(&self) -> Vec<(Route, usize)> {
        self.subs
            .iter()
            .map(|(r, s)| (*r, s.machine_count()))
            .collect()
    }

    fn sub_factory(route: Route) -> Arc<SchedulerFactory> {
        match route {
            Route::Edf => {
                Arc::new(|m| Box::new(PolicyScheduler::edf(m)) as Box<dyn OnlineScheduler>)
            }
            Route::Sjf(_) => {
                Arc::new(|m| Box::new(PolicyScheduler::sjf(m)) as Box<dyn OnlineScheduler>)
            }
            Route::Cms => Arc::new(|m| Box::new(CmsScheduler::new(m)) as Box<dyn OnlineScheduler>),
        }
    }

    fn grow_if_forced(&mut self, now: TimePoint) {
        loop {
            let breached = self.subs.iter().any(|(r, s)| {
                s.machine_count() > 4 * self.config.class_width(*r) * self.estimate as usize
            });
            if !breached {
                return;
            }
            self.estimate *= 2;
            self.estimate_history.push((now, self.estimate));
        }
    }

    fn sub_alive(&self, route: Route, alive: &[AliveJob]) -> Vec<AliveJob> {
        alive
            .iter()
            .filter(|a| self.routes.get(&a.job.id) == Some(&route))
            .copied()
            .collect()
    }
}

impl OnlineScheduler for AdaptiveHybrid {
    fn name(&self) -> String {
        format!("hybrid-adaptive[est={}]", self.estimate)
    }

    fn machine_count(&self) -> usize {
        self.subs.values().map(|s| s.machine_count()).sum()
    }

    fn index_span(&self) -> usize {
        self.subs.values().map(|s| s.index_span()).max().unwrap_or(0)
    }

    fn arrive(&mut self, job: &Job, alive: &[AliveJob], now: TimePoint) {
        self.grow_if_forced(now);
        let r = route(job, self.estimate);
        self.routes.insert(job.id, r);
        let sub_alive = self.sub_alive(r, alive);
        let lookahead = Arc::clone(&self.lookahead);
        let speed = self.speed;
        let allocator = Arc::clone(&self.allocator);
        let sub = self.subs.entry(r).or_insert_with(|| {
            DoublingScheduler::with_allocator(
                r.to_string(),
                Self::sub_factory(r),
                lookahead,
                speed,
                allocator,
            )
        });
        sub.arrive(job, &sub_alive, now);
    }

    fn assign(&mut self, alive: &[AliveJob], now: TimePoint) -> Result<Assignment, Failure> {
        let mut merged = Assignment::empty();
        let routes: Vec<Route> = self.subs.keys().copied().collect();
        for r in routes {
            let sub_alive = self.sub_alive(r, alive);
            let sub = self.subs.get_mut(&r).unwrap();
            let local = sub.assign(&sub_alive, now)?;
            merged = merged.merge(local);
        }
        Ok(merged)
    }

    fn next_wakeup(&self, now: TimePoint) -> Option<TimePoint> {
        self.subs.values().filter_map(|s| s.next_wakeup(now)).min()
    }

    fn advance(&mut self, to: TimePoint) {
        for s in self.subs.values_mut() {
            s.advance(to);
        }
    }

    fn clone_box(&self) -> Box<dyn OnlineScheduler> {
        Box::new(self.clone())
    }
}
