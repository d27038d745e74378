//! Fixed-fleet hybrid scheduler for a known machine target.
//!
//! Given a target m* (the fleet a clairvoyant scheduler would need), jobs
//! are split by relative laxity at arrival and never re-routed:
//!
//! * very tight jobs (laxity share at most 1/m*) go to a budgeted CMS block,
//! * loose jobs (laxity share at least 1/4) go to an earliest-deadline block,
//! * the band in between is covered by doubly-exponential laxity buckets,
//!   each served shortest-job-first.
//!
//! Every block is a fixed multiple of m* wide, so the whole fleet is a
//! constant factor times m*; the CMS block carries one extra non-working
//! overflow slot at the very end of the index range.

use super::{AliveJob, Assignment, CmsScheduler, Failure, OnlineScheduler, PolicyScheduler};
use crate::job::{Job, JobId};
use crate::route::{bucket_count, route, Route};
use crate::time::TimePoint;
use std::collections::BTreeMap;

/// Fleet-width multipliers per block, in units of m*.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HybridConfig {
    pub m_star: u32,
    pub c_edf: usize,
    pub c_sjf: usize,
    pub c_cms: usize,
}

impl HybridConfig {
    pub fn new(m_star: u32) -> HybridConfig {
        HybridConfig {
            m_star,
            c_edf: 16,
            c_sjf: 8,
            c_cms: 8,
        }
    }

    pub fn buckets(&self) -> u32 {
        bucket_count(self.m_star)
    }

    fn edf_width(&self) -> usize {
        self.c_edf * self.m_star as usize
    }

    fn sjf_width(&self) -> usize {
        self.c_sjf * self.m_star as usize
    }

    fn cms_width(&self) -> usize {
        self.c_cms * self.m_star as usize
    }
}

struct Child {
    route: Route,
    /// Global index of the machine just before this block.
    offset: usize,
    inner: Box<dyn OnlineScheduler>,
}

impl Clone for Child {
    fn clone(&self) -> Child {
        Child {
            route: self.route,
            offset: self.offset,
            inner: self.inner.clone_box(),
        }
    }
}

#[derive(Clone)]
pub struct HybridScheduler {
    config: HybridConfig,
    children: Vec<Child>,
    routes: BTreeMap<JobId, Route>,
}

impl HybridScheduler {
    pub fn new(config: HybridConfig) -> HybridScheduler {
        assert!(config.m_star >= 1);
        let mut children = Vec::new();
        let mut offset = 0usize;
        children.push(Child {
            route: Route::Edf,
            offset,
            inner: Box::new(PolicyScheduler::edf(config.edf_width())),
        });
        offset += config.edf_width();
        for i in 1..=config.buckets() {
            children.push(Child {
                route: Route::Sjf(i),
                offset,
                inner: Box::new(PolicyScheduler::sjf(config.sjf_width())),
            });
            offset += config.sjf_width();
        }
        children.push(Child {
            route: Route::Cms,
            offset,
            inner: Box::new(CmsScheduler::new(config.cms_width())),
        });
        HybridScheduler {
            config,
            children,
            routes: BTreeMap::new(),
        }
    }

    pub fn config(&self) -> &HybridConfig {
        &self.config
    }

    /// The block a job was routed to at arrival.
    pub fn route_of(&self, job: JobId) -> Option<Route> {
        self.routes.get(&job).copied()
    }

    /// (route, first machine, working width) per block, in index order.
    pub fn blocks(&self) -> Vec<(Route, usize, usize)> {
        self.children
            .iter()
            .map(|c| (c.route, c.offset + 1, c.inner.machine_count()))
            .collect()
    }

    fn child_alive(&self, route: Route, alive: &[AliveJob]) -> Vec<AliveJob> {
        alive
            .iter()
            .filter(|a| self.routes.get(&a.job.id) == Some(&route))
            .copied()
            .collect()
    }
}

impl OnlineScheduler for HybridScheduler {
    fn name(&self) -> String {
        format!("hybrid[m*={}]", self.config.m_star)
    }

    fn machine_count(&self) -> usize {
        self.children.iter().map(|c| c.inner.machine_count()).sum()
    }

    fn index_span(&self) -> usize {
        self.children
            .iter()
            .map(|c| c.offset + c.inner.index_span())
            .max()
            .unwrap_or(0)
    }

    fn arrive(&mut self, job: &Job, alive: &[AliveJob], now: TimePoint) {
        let r = route(job, self.config.m_star);
        self.routes.insert(job.id, r);
        let child_alive = self.child_alive(r, alive);
        let child = self
            .children
            .iter_mut()
            .find(|c| c.route == r)
            .expect("every route has a block");
        child.inner.arrive(job, &child_alive, now);
    }

    fn assign(&mut self, alive: &[AliveJob], now: TimePoint) -> Result<Assignment, Failure> {
        let mut merged = Assignment::empty();
        for idx in 0..self.children.len() {
            let route = self.children[idx].route;
            let child_alive = self.child_alive(route, alive);
            let child = &mut self.children[idx];
            let local = child.inner.assign(&child_alive, now)?;
            merged = merged.merge(local.offset(child.offset));
        }
        Ok(merged)
    }

    fn next_wakeup(&self, now: TimePoint) -> Option<TimePoint> {
        self.children
            .iter()
            .filter_map(|c| c.inner.next_wakeup(now))
            .min()
    }

    fn advance(&mut self, to: TimePoint) {
        for c in &mut self.children {
            c.inner.advance(to);
        }
    }

    fn clone_box(&self) -> Box<dyn OnlineScheduler> {
        Box::new(self.clone())
    }
}
