//! Priority-list schedulers: EDF and SJF.
//!
//! Both rank the alive jobs by a fixed key and run the top m on machines
//! 1..m in index order. EDF ranks by (deadline, id). SJF ranks by
//! (original size, id) - the size at release, not the remaining work, so a
//! job's priority never changes as it runs.

use super::{AliveJob, Assignment, Failure, OnlineScheduler};
use crate::job::Job;
use crate::time::TimePoint;

/// EDF order: top min(m, alive) jobs by earliest deadline, ties by id.
pub fn edf_assignment(alive: &[AliveJob], m: usize) -> Assignment {
    ranked(alive, m, |a| (a.job.d, a.job.id))
}

/// SJF order: top min(m, alive) jobs by smallest original size, ties by id.
pub fn sjf_assignment(alive: &[AliveJob], m: usize) -> Assignment {
    ranked(alive, m, |a| (a.job.p, a.job.id))
}

fn ranked<K: Ord>(alive: &[AliveJob], m: usize, key: impl Fn(&AliveJob) -> K) -> Assignment {
    let mut order: Vec<&AliveJob> = alive.iter().collect();
    order.sort_by_key(|a| key(a));
    Assignment::new(
        order
            .iter()
            .take(m)
            .enumerate()
            .map(|(i, a)| (i + 1, a.job.id))
            .collect(),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Key {
    Deadline,
    Size,
}

/// Stateless list scheduler on a fixed pool of m machines.
#[derive(Clone, Debug)]
pub struct PolicyScheduler {
    m: usize,
    key: Key,
}

impl PolicyScheduler {
    pub fn edf(m: usize) -> PolicyScheduler {
        PolicyScheduler {
            m,
            key: Key::Deadline,
        }
    }

    pub fn sjf(m: usize) -> PolicyScheduler {
        PolicyScheduler { m, key: Key::Size }
    }
}

impl OnlineScheduler for PolicyScheduler {
    fn name(&self) -> String {
        match self.key {
            Key::Deadline => format!("edf[{}]", self.m),
            Key::Size => format!("sjf[{}]", self.m),
        }
    }

    fn machine_count(&self) -> usize {
        self.m
    }

    fn arrive(&mut self, _job: &Job, _alive: &[AliveJob], _now: TimePoint) {}

    fn assign(&mut self, alive: &[AliveJob], _now: TimePoint) -> Result<Assignment, Failure> {
        Ok(match self.key {
            Key::Deadline => edf_assignment(alive, self.m),
            Key::Size => sjf_assignment(alive, self.m),
        })
    }

    fn next_wakeup(&self, _now: TimePoint) -> Option<TimePoint> {
        None
    }

    fn advance(&mut self, _to: TimePoint) {}

    fn clone_box(&self) -> Box<dyn OnlineScheduler> {
        Box::new(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::job::JobId;
    use crate::time::TimePoint;

    fn alive(spec: &[(JobId, i64, i64, i64)]) -> Vec<AliveJob> {
        spec.iter()
            .map(|&(id, r, d, p)| AliveJob {
                job: Job::new(id, r, d, p),
                remaining: TimePoint::from_int(p),
            })
            .collect()
    }

    #[test]
    fn edf_picks_earliest_deadlines_in_machine_order() {
        let a = alive(&[(0, 0, 9, 2), (1, 0, 4, 2), (2, 0, 7, 2)]);
        let asg = edf_assignment(&a, 2);
        assert_eq!(asg.pairs(), &[(1, 1), (2, 2)]);
    }

    #[test]
    fn edf_breaks_deadline_ties_by_id() {
        let a = alive(&[(3, 0, 5, 1), (1, 0, 5, 1), (2, 0, 5, 1)]);
        let asg = edf_assignment(&a, 2);
        assert_eq!(asg.pairs(), &[(1, 1), (2, 2)]);
    }

    #[test]
    fn sjf_uses_original_size_not_remaining() {
        let mut a = alive(&[(0, 0, 20, 5), (1, 0, 20, 3)]);
        // job 0 has nearly finished, but its original size still ranks it
        a[0].remaining = TimePoint::new(1, 2);
        let asg = sjf_assignment(&a, 1);
        assert_eq!(asg.pairs(), &[(1, 1)]);
    }

    #[test]
    fn fewer_jobs_than_machines() {
        let a = alive(&[(7, 0, 5, 1)]);
        let asg = edf_assignment(&a, 4);
        assert_eq!(asg.pairs(), &[(1, 7)]);
        assert_eq!(edf_assignment(&[], 4), Assignment::empty());
    }
}
