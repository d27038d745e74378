//! The budget-burning scheduler for very tight jobs (CMS).
//!
//! Runs on m machines plus one extra machine that must never process work.
//! At arrival a job receives a waiting budget of laxity/(m+1) per machine.
//! At every event the alive jobs are laid out by `sub_cms`: iterate them
//! latest-arrival-first; a job is parked on the cursor machine while its
//! budget for that machine is positive (the budget burns at wall-clock rate
//! 1), and becomes active there the moment that budget is zero - the cursor
//! then moves on, so active jobs occupy distinct machines. Several parked
//! jobs may share a machine index with the active one; parked jobs never
//! process, so the machine still runs at most one job. The scheduler
//! declares failure exactly when some job becomes active on the forbidden
//! machine m+1.
//!
//! Waiting is fully paid for by budgets: an alive job is either processing
//! or burning, and its total budget equals its laxity, so a non-failing run
//! never misses a deadline.

use super::{AliveJob, Assignment, Failure, OnlineScheduler};
use crate::job::{Job, JobId};
use crate::time::{Rat, TimePoint};
use serde::Serialize;
use std::collections::BTreeMap;

/// Compute the per-job machine placement. `order` must be the alive jobs
/// sorted latest-arrival-first (ties: id descending); `budget` answers
/// "does job j still have positive budget on machine i" for i in [1, m+1]
/// (machines beyond m+1 are treated as having budget, which only matters in
/// states that already failed). Returns (job -> machine, active flag).
pub fn sub_cms(
    order: &[JobId],
    budget_positive: impl Fn(JobId, usize) -> bool,
    m: usize,
) -> Vec<(JobId, usize, bool)> {
    let mut out = Vec::with_capacity(order.len());
    let mut cursor = 1usize;
    for &j in order {
        let active = cursor <= m + 1 && !budget_positive(j, cursor);
        out.push((j, cursor, active));
        if active {
            cursor += 1;
        }
    }
    out
}

/// One evaluation step: the assignment at `now`, the next internal event
/// (budget exhaustion or active-job completion, whichever is earlier, also
/// cut by `next_arrival`), and the failure flag as data.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CmsStep {
    pub assignment: Assignment,
    pub next_event: Option<TimePoint>,
    pub failure: Option<Failure>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CmsTraceJob {
    pub job: JobId,
    pub machine: usize,
    pub active: bool,
    /// Budgets for machines 1..=m+1 at this instant.
    pub budgets: Vec<TimePoint>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CmsTraceEntry {
    pub time: TimePoint,
    pub jobs: Vec<CmsTraceJob>,
}

#[derive(Clone, Debug)]
pub struct CmsScheduler {
    m: usize,
    /// Budgets indexed by job, position i holds the budget for machine i+1.
    budgets: BTreeMap<JobId, Vec<TimePoint>>,
    arrivals: BTreeMap<JobId, TimePoint>,
    /// Placement computed at the last assign: (machine, active).
    placement: BTreeMap<JobId, (usize, bool)>,
    last_assign: Option<TimePoint>,
    trace: Option<Vec<CmsTraceEntry>>,
}

impl CmsScheduler {
    pub fn new(m: usize) -> CmsScheduler {
        assert!(m >= 1);
        CmsScheduler {
            m,
            budgets: BTreeMap::new(),
            arrivals: BTreeMap::new(),
            placement: BTreeMap::new(),
            last_assign: None,
            trace: None,
        }
    }

    pub fn with_trace(m: usize) -> CmsScheduler {
        let mut s = CmsScheduler::new(m);
        s.trace = Some(Vec::new());
        s
    }

    pub fn machines(&self) -> usize {
        self.m
    }

    pub fn budget(&self, job: JobId, machine: usize) -> Option<TimePoint> {
        self.budgets.get(&job).and_then(|b| b.get(machine - 1).copied())
    }

    pub fn trace(&self) -> Option<&[CmsTraceEntry]> {
        self.trace.as_deref()
    }

    /// Alive jobs ordered latest-arrival-first, ties id descending.
    fn order(&self, alive: &[AliveJob]) -> Vec<JobId> {
        let mut order: Vec<&AliveJob> = alive.iter().collect();
        order.sort_by(|x, y| {
            let ax = self.arrivals.get(&x.job.id).copied().unwrap_or(x.job.release());
            let ay = self.arrivals.get(&y.job.id).copied().unwrap_or(y.job.release());
            ay.cmp(&ax).then(y.job.id.cmp(&x.job.id))
        });
        order.iter().map(|a| a.job.id).collect()
    }

    fn place(&mut self, alive: &[AliveJob], now: TimePoint) -> Vec<(JobId, usize, bool)> {
        let order = self.order(alive);
        let placement = sub_cms(
            &order,
            |j, i| {
                self.budgets
                    .get(&j)
                    .and_then(|b| b.get(i - 1))
                    .map_or(true, |b| !b.is_zero())
            },
            self.m,
        );
        // keep only alive jobs in the stored state
        let alive_ids: std::collections::BTreeSet<JobId> =
            alive.iter().map(|a| a.job.id).collect();
        self.budgets.retain(|j, _| alive_ids.contains(j));
        self.arrivals.retain(|j, _| alive_ids.contains(j));
        self.placement = placement.iter().map(|&(j, mi, act)| (j, (mi, act))).collect();
        self.last_assign = Some(now);
        if self.trace.is_some() {
            let entry = CmsTraceEntry {
                time: now,
                jobs: placement
                    .iter()
                    .map(|&(j, mi, act)| CmsTraceJob {
                        job: j,
                        machine: mi,
                        active: act,
                        budgets: self.budgets.get(&j).cloned().unwrap_or_default(),
                    })
                    .collect(),
            };
            self.trace.as_mut().unwrap().push(entry);
        }
        placement
    }

    fn failure_in(&self, placement: &[(JobId, usize, bool)], now: TimePoint) -> Option<Failure> {
        placement
            .iter()
            .find(|&&(_, mi, act)| act && mi == self.m + 1)
            .map(|&(j, _, _)| Failure {
                time: now,
                scheduler: self.name(),
                reason: format!("job {} active on forbidden machine {}", j, self.m + 1),
            })
    }

    /// Spec-level single step, composing placement, failure detection and
    /// the next-event computation in one call (the engine performs the same
    /// sequence through the trait methods).
    pub fn step(
        &mut self,
        alive: &[AliveJob],
        now: TimePoint,
        next_arrival: Option<TimePoint>,
        speed: Rat,
    ) -> CmsStep {
        let placement = self.place(alive, now);
        let failure = self.failure_in(&placement, now);
        if failure.is_some() {
            return CmsStep {
                assignment: Assignment::empty(),
                next_event: None,
                failure,
            };
        }
        let assignment = Assignment::new(
            placement
                .iter()
                .filter(|&&(_, mi, act)| act && mi <= self.m)
                .map(|&(j, mi, _)| (mi, j))
                .collect(),
        );
        // delta1: earliest budget exhaustion among parked jobs
        let mut next: Option<TimePoint> = self.wakeup_after(now);
        // delta2: earliest completion among active jobs
        for a in alive {
            if assignment.machine_of(a.job.id).is_some() {
                let done = now + a.remaining.div_rat(speed);
                next = Some(next.map_or(done, |t| t.min(done)));
            }
        }
        if let Some(arr) = next_arrival {
            next = Some(next.map_or(arr, |t| t.min(arr)));
        }
        CmsStep {
            assignment,
            next_event: next,
            failure: None,
        }
    }

    fn wakeup_after(&self, now: TimePoint) -> Option<TimePoint> {
        let mut best: Option<TimePoint> = None;
        for (&j, &(mi, act)) in &self.placement {
            if act || mi > self.m + 1 {
                continue;
            }
            if let Some(b) = self.budgets.get(&j).and_then(|b| b.get(mi - 1)) {
                if !b.is_zero() {
                    let t = now + *b;
                    best = Some(best.map_or(t, |cur| cur.min(t)));
                }
            }
        }
        best
    }
}

impl OnlineScheduler for CmsScheduler {
    fn name(&self) -> String {
        format!("cms[{}]", self.m)
    }

    fn machine_count(&self) -> usize {
        self.m
    }

    fn index_span(&self) -> usize {
        self.m + 1
    }

    fn arrive(&mut self, job: &Job, _alive: &[AliveJob], now: TimePoint) {
        let share = TimePoint::new(job.laxity(), (self.m + 1) as i64);
        self.budgets.insert(job.id, vec![share; self.m + 1]);
        self.arrivals.insert(job.id, now);
    }

    fn assign(&mut self, alive: &[AliveJob], now: TimePoint) -> Result<Assignment, Failure> {
        let placement = self.place(alive, now);
        if let Some(f) = self.failure_in(&placement, now) {
            return Err(f);
        }
        Ok(Assignment::new(
            placement
                .iter()
                .filter(|&&(_, mi, act)| act && mi <= self.m)
                .map(|&(j, mi, _)| (mi, j))
                .collect(),
        ))
    }

    fn next_wakeup(&self, now: TimePoint) -> Option<TimePoint> {
        self.wakeup_after(now)
    }

    fn advance(&mut self, to: TimePoint) {
        let Some(from) = self.last_assign else {
            return;
        };
        let elapsed = to - from;
        if elapsed.is_zero() {
            return;
        }
        // parked jobs burn their assigned machine's budget at rate 1,
        // regardless of processing speed
        for (&j, &(mi, act)) in &self.placement {
            if act || mi > self.m + 1 {
                continue;
            }
            if let Some(b) = self.budgets.get_mut(&j).and_then(|b| b.get_mut(mi - 1)) {
                *b -= elapsed;
                debug_assert!(
                    !b.is_negative(),
                    "budget burned past zero: events must not skip exhaustion"
                );
            }
        }
    }

    fn clone_box(&self) -> Box<dyn OnlineScheduler> {
        Box::new(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::rat;

    fn aj(id: JobId, r: i64, d: i64, p: i64) -> AliveJob {
        AliveJob {
            job: Job::new(id, r, d, p),
            remaining: TimePoint::from_int(p),
        }
    }

    fn tp(n: i64, d: i64) -> TimePoint {
        TimePoint::new(n, d)
    }

    #[test]
    fn budgets_split_laxity_evenly() {
        let mut cms = CmsScheduler::new(2);
        let job = Job::new(0, 0, 3, 1);
        cms.arrive(&job, &[], TimePoint::ZERO);
        for machine in 1..=3 {
            assert_eq!(cms.budget(0, machine), Some(tp(2, 3)));
        }
    }

    #[test]
    fn hand_trace_single_job() {
        // one job (r=0, d=3, p=1) on m=2: parked on machine 1 until its
        // first budget burns out at 2/3, then active until done at 5/3
        let mut cms = CmsScheduler::new(2);
        let job = Job::new(0, 0, 3, 1);
        let alive = [aj(0, 0, 3, 1)];
        cms.arrive(&job, &[], TimePoint::ZERO);

        let step = cms.step(&alive, TimePoint::ZERO, None, rat(1, 1));
        assert!(step.failure.is_none());
        assert!(step.assignment.is_empty(), "still parked");
        assert_eq!(step.next_event, Some(tp(2, 3)));

        cms.advance(tp(2, 3));
        assert_eq!(cms.budget(0, 1), Some(TimePoint::ZERO));
        assert_eq!(cms.budget(0, 2), Some(tp(2, 3)), "only machine 1 burned");

        let step = cms.step(&alive, tp(2, 3), None, rat(1, 1));
        assert!(step.failure.is_none());
        assert_eq!(step.assignment.pairs(), &[(1, 0)]);
        assert_eq!(step.next_event, Some(tp(5, 3)), "completion at 2/3 + 1");
    }

    #[test]
    fn zero_laxity_job_is_active_immediately() {
        let mut cms = CmsScheduler::new(1);
        let job = Job::new(0, 5, 7, 2);
        cms.arrive(&job, &[], TimePoint::from_int(5));
        let step = cms.step(&[aj(0, 5, 7, 2)], TimePoint::from_int(5), None, rat(1, 1));
        assert!(step.failure.is_none());
        assert_eq!(step.assignment.pairs(), &[(1, 0)]);
    }

    #[test]
    fn sub_cms_shares_machine_between_parked_and_active() {
        // latest-first order [j2, j1]; j2 parked on machine 1 with budget,
        // j1 active there: both sit on machine 1, cursor moves only for j1
        let placement = sub_cms(&[2, 1], |j, _i| j == 2, 1);
        assert_eq!(placement, vec![(2, 1, false), (1, 1, true)]);
    }

    #[test]
    fn sub_cms_cursor_never_advances_without_activation() {
        let placement = sub_cms(&[3, 2, 1], |_, _| true, 2);
        assert_eq!(
            placement,
            vec![(3, 1, false), (2, 1, false), (1, 1, false)]
        );
    }

    #[test]
    fn sub_cms_cursor_can_reach_forbidden_machine() {
        // all three jobs have zero budgets everywhere: they activate on
        // machines 1, 2, 3 in order; machine 3 = m+1 is the failure
        let placement = sub_cms(&[3, 2, 1], |_, _| false, 2);
        assert_eq!(placement, vec![(3, 1, true), (2, 2, true), (1, 3, true)]);
    }

    #[test]
    fn latest_arrival_first_with_id_tiebreak() {
        let mut cms = CmsScheduler::new(3);
        let j0 = Job::new(0, 0, 10, 1);
        let j1 = Job::new(1, 0, 10, 1);
        let j2 = Job::new(2, 2, 12, 1);
        cms.arrive(&j0, &[], TimePoint::ZERO);
        cms.arrive(&j1, &[], TimePoint::ZERO);
        cms.arrive(&j2, &[], TimePoint::from_int(2));
        let alive = [aj(0, 0, 10, 1), aj(1, 0, 10, 1), aj(2, 2, 12, 1)];
        // latest arrival j2 first; j0 and j1 tie on arrival, higher id first
        assert_eq!(cms.order(&alive), vec![2, 1, 0]);
    }

    #[test]
    fn failure_reported_as_data() {
        // two zero-laxity jobs on m=1: the second activation lands on the
        // forbidden machine 2
        let mut cms = CmsScheduler::new(1);
        let j0 = Job::new(0, 0, 2, 2);
        let j1 = Job::new(1, 0, 2, 2);
        cms.arrive(&j0, &[], TimePoint::ZERO);
        cms.arrive(&j1, &[], TimePoint::ZERO);
        let alive = [aj(0, 0, 2, 2), aj(1, 0, 2, 2)];
        let step = cms.step(&alive, TimePoint::ZERO, None, rat(1, 1));
        let failure = step.failure.expect("forbidden machine must fail");
        assert_eq!(failure.time, TimePoint::ZERO);
        assert!(failure.reason.contains("forbidden"));
    }

    #[test]
    fn next_arrival_cuts_next_event() {
        let mut cms = CmsScheduler::new(2);
        let job = Job::new(0, 0, 3, 1);
        cms.arrive(&job, &[], TimePoint::ZERO);
        let step = cms.step(
            &[aj(0, 0, 3, 1)],
            TimePoint::ZERO,
            Some(tp(1, 2)),
            rat(1, 1),
        );
        assert_eq!(step.next_event, Some(tp(1, 2)), "arrival preempts budget");
    }

    #[test]
    fn budgets_only_burn_on_the_assigned_machine() {
        let mut cms = CmsScheduler::new(2);
        let j0 = Job::new(0, 0, 6, 2);
        let j1 = Job::new(1, 0, 6, 2);
        cms.arrive(&j0, &[], TimePoint::ZERO);
        cms.arrive(&j1, &[], TimePoint::ZERO);
        let alive = [aj(0, 0, 6, 2), aj(1, 0, 6, 2)];
        let step = cms.step(&alive, TimePoint::ZERO, None, rat(1, 1));
        // both parked on machine 1 (latest-first: j1 then j0)
        assert!(step.assignment.is_empty());
        cms.advance(tp(1, 1));
        assert_eq!(cms.budget(0, 1), Some(tp(1, 3)));
        assert_eq!(cms.budget(1, 1), Some(tp(1, 3)));
        assert_eq!(cms.budget(0, 2), Some(tp(4, 3)));
        assert_eq!(cms.budget(1, 2), Some(tp(4, 3)));
    }
}
