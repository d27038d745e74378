//! Event-driven simulation engine.
//!
//! The engine owns the clock and the remaining work of every job; the
//! scheduler is a passive policy queried at events. Events are arrivals,
//! completions, deadlines of alive jobs, and scheduler wakeups (budget
//! exhaustions); between consecutive events the assignment is constant, so
//! all progress is exact rational arithmetic on (time delta) * speed.
//!
//! A run normally stops the first time some alive job's remaining work
//! exceeds what one machine can still do before its deadline - from that
//! moment no scheduler can save the job. Simulating past that point only
//! matters when the trace up to the actual miss is wanted (certificate
//! extraction); `StopPolicy::RunToFirstMiss` provides it.

use crate::job::{Instance, JobId};
use crate::schedulers::{AliveJob, Assignment, Failure, LookaheadFn, OnlineScheduler};
use crate::time::{Interval, Rat, TimePoint};
use num_traits::Signed;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;

/// One contiguous stretch of one job running on one machine.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchedulePiece {
    pub machine: usize,
    pub job: JobId,
    pub interval: Interval,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum StopPolicy {
    /// Stop as soon as some alive job provably cannot finish on time.
    #[default]
    EarlyInfeasible,
    /// Keep scheduling until a deadline actually passes with work left.
    RunToFirstMiss,
}

/// First unmet (or provably unmeetable) deadline observed during a run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissInfo {
    pub job: JobId,
    /// Instant at which the miss was detected.
    pub time: TimePoint,
    pub deadline: TimePoint,
    /// Work still owed at that instant.
    pub remaining: TimePoint,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunResult {
    pub schedule: Vec<SchedulePiece>,
    /// Machines the scheduler has claimed (pool accounting).
    pub machines_open: usize,
    /// Distinct machine indices that actually processed work.
    pub machines_busy: usize,
    pub feasible: bool,
    /// Scheduler-declared failure, if any.
    pub failure: Option<Failure>,
    pub miss: Option<MissInfo>,
    /// Number of event instants processed.
    pub events: usize,
    pub completions: BTreeMap<JobId, TimePoint>,
}

/// Run a scheduler over a full instance at the given machine speed.
pub fn simulate(
    sched: &mut dyn OnlineScheduler,
    inst: &Instance,
    speed: Rat,
    stop: StopPolicy,
) -> RunResult {
    let pending: Vec<AliveJob> = inst
        .jobs()
        .iter()
        .map(|j| AliveJob {
            job: *j,
            remaining: j.size(),
        })
        .collect();
    let start = inst
        .min_release()
        .map(TimePoint::from_int)
        .unwrap_or(TimePoint::ZERO);
    Simulation::new(sched, speed, stop).run(Vec::new(), pending, start)
}

/// Resume-style entry: `alive` jobs are already in flight at `now` (their
/// arrivals were already delivered to the scheduler) and `pending` jobs
/// will arrive later.
pub fn resume(
    sched: &mut dyn OnlineScheduler,
    alive: Vec<AliveJob>,
    pending: Vec<AliveJob>,
    now: TimePoint,
    speed: Rat,
    stop: StopPolicy,
) -> RunResult {
    Simulation::new(sched, speed, stop).run(alive, pending, now)
}

/// Would this scheduler, as it stands, finish every alive job on time if no
/// further jobs ever arrived? Runs the given snapshot to quiescence. The
/// snapshot must already have been told about every job in `alive`.
pub fn lookahead_feasible(
    mut snapshot: Box<dyn OnlineScheduler>,
    alive: Vec<AliveJob>,
    now: TimePoint,
    speed: Rat,
) -> bool {
    resume(
        snapshot.as_mut(),
        alive,
        Vec::new(),
        now,
        speed,
        StopPolicy::EarlyInfeasible,
    )
    .feasible
}

/// The simulation-backed admission probe in the shape pool schedulers expect.
pub fn simulation_lookahead() -> Arc<LookaheadFn> {
    Arc::new(|snapshot, alive, now, speed| lookahead_feasible(snapshot, alive, now, speed))
}

// ---------------------------------------------------------------------------
// schedule verification
// ---------------------------------------------------------------------------

/// Why a schedule is not a valid solution for an instance.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum Violation {
    #[error("piece references job {0} which is not in the instance")]
    UnknownJob(JobId),
    #[error("piece on machine {machine} lies outside the window of job {job}")]
    OutsideWindow { job: JobId, machine: usize },
    #[error("piece uses machine {0} outside 1..={1}")]
    BadMachine(usize, usize),
    #[error("piece for job {0} has non-positive length")]
    EmptyPiece(JobId),
    #[error("machine {machine} runs jobs {a} and {b} at once")]
    MachineOverlap { machine: usize, a: JobId, b: JobId },
    #[error("job {job} runs on machines {a} and {b} at once")]
    JobOverlap { job: JobId, a: usize, b: usize },
    #[error("job {job} gets {got} machine-time, needs {want}")]
    WrongAmount { job: JobId, got: String, want: String },
}

/// Check that `pieces` is a complete, non-overlapping, in-window schedule of
/// `inst` on `m` machines of the given speed.
pub fn verify(
    pieces: &[SchedulePiece],
    inst: &Instance,
    m: usize,
    speed: Rat,
) -> Result<(), Violation> {
    let by_id: BTreeMap<JobId, &crate::job::Job> =
        inst.jobs().iter().map(|j| (j.id, j)).collect();

    for p in pieces {
        let job = by_id.get(&p.job).ok_or(Violation::UnknownJob(p.job))?;
        if p.machine < 1 || p.machine > m {
            return Err(Violation::BadMachine(p.machine, m));
        }
        if p.interval.end <= p.interval.start {
            return Err(Violation::EmptyPiece(p.job));
        }
        if p.interval.start < job.release() || p.interval.end > job.deadline() {
            return Err(Violation::OutsideWindow {
                job: p.job,
                machine: p.machine,
            });
        }
    }

    // no machine runs two jobs at once
    let mut per_machine: BTreeMap<usize, Vec<&SchedulePiece>> = BTreeMap::new();
    for p in pieces {
        per_machine.entry(p.machine).or_default().push(p);
    }
    for (m, ps) in &mut per_machine {
        ps.sort_by_key(|p| p.interval.start);
        for w in ps.windows(2) {
            if w[1].interval.start < w[0].interval.end {
                return Err(Violation::MachineOverlap {
                    machine: *m,
                    a: w[0].job,
                    b: w[1].job,
                });
            }
        }
    }

    // no job runs on two machines at once
    let mut per_job: BTreeMap<JobId, Vec<&SchedulePiece>> = BTreeMap::new();
    for p in pieces {
        per_job.entry(p.job).or_default().push(p);
    }
    for (j, ps) in &mut per_job {
        ps.sort_by_key(|p| (p.interval.start, p.interval.end));
        for w in ps.windows(2) {
            if w[1].interval.start < w[0].interval.end {
                return Err(Violation::JobOverlap {
                    job: *j,
                    a: w[0].machine,
                    b: w[1].machine,
                });
            }
        }
    }

    // every job receives exactly its size in work (machine-time * speed)
    for job in inst.jobs() {
        let got: TimePoint = per_job
            .get(&job.id)
            .map(|ps| {
                ps.iter()
                    .fold(TimePoint::ZERO, |acc, p| acc + p.interval.length())
            })
            .unwrap_or(TimePoint::ZERO);
        let want = job.size().div_rat(speed);
        if got != want {
            return Err(Violation::WrongAmount {
                job: job.id,
                got: got.to_string(),
                want: want.to_string(),
            });
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// the event loop
// ---------------------------------------------------------------------------

struct Simulation<'a> {
    sched: &'a mut dyn OnlineScheduler,
    speed: Rat,
    stop: StopPolicy,
    pieces: Vec<SchedulePiece>,
    /// Per machine, the running (job, piece start); extended silently while
    /// consecutive assignments keep the pair, closed when the job changes.
    open: BTreeMap<usize, (JobId, TimePoint)>,
    /// Time up to which the open pieces have actually run.
    frontier: TimePoint,
    completions: BTreeMap<JobId, TimePoint>,
    events: usize,
}

impl<'a> Simulation<'a> {
    fn new(sched: &'a mut dyn OnlineScheduler, speed: Rat, stop: StopPolicy) -> Simulation<'a> {
        assert!(speed.is_positive(), "machine speed must be positive");
        Simulation {
            sched,
            speed,
            stop,
            pieces: Vec::new(),
            open: BTreeMap::new(),
            frontier: TimePoint::ZERO,
            completions: BTreeMap::new(),
            events: 0,
        }
    }

    fn run(
        mut self,
        mut alive: Vec<AliveJob>,
        mut pending: Vec<AliveJob>,
        mut now: TimePoint,
    ) -> RunResult {
        pending.sort_by_key(|a| (a.job.r, a.job.id));
        self.frontier = now;
        let mut next_pending = 0usize;
        let mut failure: Option<Failure> = None;
        let mut miss: Option<MissInfo> = None;

        // deliver arrivals due at the start instant
        while next_pending < pending.len() && pending[next_pending].job.release() <= now {
            let a = pending[next_pending];
            self.sched.arrive(&a.job, &alive, now);
            alive.push(a);
            next_pending += 1;
        }

        loop {
            self.events += 1;

            if let Some(m) = self.detect_miss(&alive, now) {
                miss = Some(m);
                break;
            }

            let assignment = match self.sched.assign(&alive, now) {
                Ok(a) => a,
                Err(f) => {
                    failure = Some(f);
                    break;
                }
            };
            self.check_assignment(&assignment, &alive);

            // next event: arrival, completion, alive deadline, wakeup
            let mut next: Option<TimePoint> = None;
            let mut fold = |t: TimePoint| {
                if t > now {
                    next = Some(next.map_or(t, |cur: TimePoint| cur.min(t)));
                }
            };
            if next_pending < pending.len() {
                fold(pending[next_pending].job.release());
            }
            for a in &alive {
                if assignment.machine_of(a.job.id).is_some() {
                    fold(now + a.remaining.div_rat(self.speed));
                }
                fold(a.job.deadline());
            }
            if let Some(w) = self.sched.next_wakeup(now) {
                fold(w);
            }

            let Some(t_next) = next else {
                debug_assert!(alive.is_empty() && next_pending == pending.len());
                break;
            };

            // run the assignment verbatim over [now, t_next)
            self.record(&assignment, now, t_next);
            for a in &mut alive {
                if assignment.machine_of(a.job.id).is_some() {
                    a.remaining -= (t_next - now).scale(self.speed);
                    debug_assert!(!a.remaining.is_negative());
                }
            }
            self.sched.advance(t_next);
            now = t_next;

            for a in &alive {
                if a.remaining.is_zero() {
                    self.completions.insert(a.job.id, now);
                }
            }
            alive.retain(|a| !a.remaining.is_zero());

            while next_pending < pending.len() && pending[next_pending].job.release() <= now {
                let a = pending[next_pending];
                self.sched.arrive(&a.job, &alive, now);
                alive.push(a);
                next_pending += 1;
            }

            if alive.is_empty() && next_pending == pending.len() {
                break;
            }
        }

        self.flush_open_pieces();
        let feasible = failure.is_none() && miss.is_none();
        let mut busy: Vec<usize> = self.pieces.iter().map(|p| p.machine).collect();
        busy.sort_unstable();
        busy.dedup();
        self.pieces.sort_by_key(|p| (p.interval.start, p.machine));
        RunResult {
            machines_open: self.sched.machine_count(),
            machines_busy: busy.len(),
            feasible,
            failure,
            miss,
            events: self.events,
            completions: std::mem::take(&mut self.completions),
            schedule: std::mem::take(&mut self.pieces),
        }
    }

    /// Under `EarlyInfeasible`, flag the first alive job whose remaining work
    /// exceeds speed * (deadline - now): provably lost. Under
    /// `RunToFirstMiss`, flag only a deadline that has actually arrived with
    /// work still owed. Ties break on (deadline, id) for determinism.
    fn detect_miss(&self, alive: &[AliveJob], now: TimePoint) -> Option<MissInfo> {
        let mut hit: Option<&AliveJob> = None;
        for a in alive {
            let lost = match self.stop {
                StopPolicy::EarlyInfeasible => {
                    let room = (a.job.deadline() - now)
                        .max(TimePoint::ZERO)
                        .scale(self.speed);
                    a.remaining > room
                }
                StopPolicy::RunToFirstMiss => a.job.deadline() <= now,
            };
            if lost {
                let better = hit
                    .map(|b| (a.job.d, a.job.id) < (b.job.d, b.job.id))
                    .unwrap_or(true);
                if better {
                    hit = Some(a);
                }
            }
        }
        hit.map(|a| MissInfo {
            job: a.job.id,
            time: now,
            deadline: a.job.deadline(),
            remaining: a.remaining,
        })
    }

    fn check_assignment(&self, assignment: &Assignment, alive: &[AliveJob]) {
        debug_assert!(
            assignment.pairs().iter().all(|&(m, j)| {
                m >= 1 && m <= self.sched.index_span() && alive.iter().any(|a| a.job.id == j)
            }),
            "assignment must put alive jobs on machines within the pool"
        );
        let mut jobs: Vec<JobId> = assignment.pairs().iter().map(|&(_, j)| j).collect();
        jobs.sort_unstable();
        debug_assert!(
            jobs.windows(2).all(|w| w[0] != w[1]),
            "a job cannot run on two machines at once"
        );
        let _ = (assignment, alive);
    }

    fn record(&mut self, assignment: &Assignment, from: TimePoint, to: TimePoint) {
        if to <= from {
            return;
        }
        // close pieces on machines whose job changed (or stopped)
        let stale: Vec<usize> = self
            .open
            .iter()
            .filter(|&(&m, &(j, _))| assignment.job_on(m) != Some(j))
            .map(|(&m, _)| m)
            .collect();
        for m in stale {
            let (j, start) = self.open.remove(&m).unwrap();
            if from > start {
                self.pieces.push(SchedulePiece {
                    machine: m,
                    job: j,
                    interval: Interval::new(start, from),
                });
            }
        }
        for &(m, j) in assignment.pairs() {
            self.open.entry(m).or_insert((j, from));
        }
        self.frontier = to;
    }

    fn flush_open_pieces(&mut self) {
        let end = self.frontier;
        for (m, (j, start)) in std::mem::take(&mut self.open) {
            if end > start {
                self.pieces.push(SchedulePiece {
                    machine: m,
                    job: j,
                    interval: Interval::new(start, end),
                });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::job::{Instance, Job};
    use crate::schedulers::PolicyScheduler;
    use crate::time::rat;

    fn job(id: JobId, r: i64, d: i64, p: i64) -> Job {
        Job::new(id, r, d, p)
    }

    fn inst(jobs: Vec<Job>) -> Instance {
        Instance::new(jobs).unwrap()
    }

    fn run_edf(i: &Instance, m: usize) -> RunResult {
        let mut s = PolicyScheduler::edf(m);
        simulate(&mut s, i, rat(1, 1), StopPolicy::EarlyInfeasible)
    }

    fn piece(machine: usize, j: JobId, a: i64, b: i64) -> SchedulePiece {
        SchedulePiece {
            machine,
            job: j,
            interval: Interval::from_ints(a, b),
        }
    }

    #[test]
    fn one_job_runs_start_to_finish() {
        let i = inst(vec![job(0, 0, 1, 1)]);
        let r = run_edf(&i, 1);
        assert!(r.feasible);
        assert_eq!(r.schedule, vec![piece(1, 0, 0, 1)]);
        assert_eq!(r.completions[&0], TimePoint::from_int(1));
        assert_eq!(r.machines_open, 1);
        assert_eq!(r.machines_busy, 1);
        assert!(verify(&r.schedule, &i, 1, rat(1, 1)).is_ok());
    }

    #[test]
    fn tighter_deadline_preempts_on_one_machine() {
        let i = inst(vec![job(0, 0, 10, 5), job(1, 2, 4, 1)]);
        let r = run_edf(&i, 1);
        assert!(r.feasible);
        assert_eq!(
            r.schedule,
            vec![
                piece(1, 0, 0, 2),
                piece(1, 1, 2, 3),
                piece(1, 0, 3, 6),
            ]
        );
        assert_eq!(r.completions[&1], TimePoint::from_int(3));
        assert_eq!(r.completions[&0], TimePoint::from_int(6));
        assert!(verify(&r.schedule, &i, 1, rat(1, 1)).is_ok());
    }

    #[test]
    fn preemption_migrates_and_resumes_across_machines() {
        // With two machines the displaced job keeps running on the second
        // one, then moves back when the urgent job finishes.
        let i = inst(vec![job(0, 0, 5, 5), job(1, 2, 3, 1)]);
        let r = run_edf(&i, 2);
        assert!(r.feasible);
        assert_eq!(
            r.schedule,
            vec![
                piece(1, 0, 0, 2),
                piece(1, 1, 2, 3),
                piece(2, 0, 2, 3),
                piece(1, 0, 3, 5),
            ]
        );
        assert_eq!(r.machines_busy, 2);
        assert!(verify(&r.schedule, &i, 2, rat(1, 1)).is_ok());
    }

    #[test]
    fn early_stop_flags_doomed_job_before_its_deadline() {
        // One machine: the short job runs first; by the time it finishes,
        // the long one needs 8 units with only 7 left before its deadline.
        let i = inst(vec![job(0, 0, 10, 8), job(1, 0, 3, 3)]);
        let r = run_edf(&i, 1);
        assert!(!r.feasible);
        let m = r.miss.unwrap();
        assert_eq!(m.job, 0);
        assert_eq!(m.time, TimePoint::from_int(3));
        assert_eq!(m.deadline, TimePoint::from_int(10));
        assert_eq!(m.remaining, TimePoint::from_int(8));
    }

    #[test]
    fn run_to_first_miss_keeps_the_full_trace() {
        let i = inst(vec![job(0, 0, 10, 8), job(1, 0, 3, 3)]);
        let mut s = PolicyScheduler::edf(1);
        let r = simulate(&mut s, &i, rat(1, 1), StopPolicy::RunToFirstMiss);
        assert!(!r.feasible);
        let m = r.miss.unwrap();
        assert_eq!(m.job, 0);
        assert_eq!(m.time, TimePoint::from_int(10));
        assert_eq!(m.remaining, TimePoint::from_int(1));
        // the doomed job still ran all the way to its deadline
        assert!(r.schedule.contains(&piece(1, 0, 3, 10)));
    }

    #[test]
    fn faster_machines_shorten_processing() {
        let i = inst(vec![job(0, 0, 4, 2)]);
        let mut s = PolicyScheduler::edf(1);
        let r = simulate(&mut s, &i, rat(2, 1), StopPolicy::EarlyInfeasible);
        assert!(r.feasible);
        assert_eq!(r.schedule, vec![piece(1, 0, 0, 1)]);
        assert!(verify(&r.schedule, &i, 1, rat(2, 1)).is_ok());
        // fractional speed stretches it
        let mut s = PolicyScheduler::edf(1);
        let r = simulate(&mut s, &i, rat(2, 3), StopPolicy::EarlyInfeasible);
        assert!(r.feasible);
        assert_eq!(r.completions[&0], TimePoint::new(3, 1));
        assert!(verify(&r.schedule, &i, 1, rat(2, 3)).is_ok());
    }

    #[test]
    fn late_release_leaves_machines_idle() {
        let i = inst(vec![job(0, 5, 7, 2)]);
        let r = run_edf(&i, 3);
        assert!(r.feasible);
        assert_eq!(r.schedule, vec![piece(1, 0, 5, 7)]);
        assert_eq!(r.machines_busy, 1);
    }

    #[test]
    fn empty_instance_is_trivially_feasible() {
        let i = inst(vec![]);
        let r = run_edf(&i, 2);
        assert!(r.feasible);
        assert!(r.schedule.is_empty());
        assert!(r.completions.is_empty());
        assert!(verify(&r.schedule, &i, 2, rat(1, 1)).is_ok());
    }

    #[test]
    fn verify_rejects_tampered_schedules() {
        let i = inst(vec![job(0, 0, 4, 2), job(1, 0, 4, 2)]);
        let good = vec![piece(1, 0, 0, 2), piece(2, 1, 0, 2)];
        assert!(verify(&good, &i, 2, rat(1, 1)).is_ok());

        // two jobs on the same machine at once
        let overlap = vec![piece(1, 0, 0, 2), piece(1, 1, 1, 3)];
        assert!(matches!(
            verify(&overlap, &i, 2, rat(1, 1)),
            Err(Violation::MachineOverlap { machine: 1, .. })
        ));

        // one job on two machines at once
        let split = vec![
            piece(1, 0, 0, 1),
            piece(2, 0, 0, 1),
            piece(2, 1, 1, 3),
        ];
        assert!(matches!(
            verify(&split, &i, 2, rat(1, 1)),
            Err(Violation::JobOverlap { job: 0, .. })
        ));

        // running outside the job's window
        let late = vec![piece(1, 0, 3, 5), piece(2, 1, 0, 2)];
        assert!(matches!(
            verify(&late, &i, 2, rat(1, 1)),
            Err(Violation::OutsideWindow { job: 0, .. })
        ));

        // short-changed work
        let short = vec![piece(1, 0, 0, 1), piece(2, 1, 0, 2)];
        assert!(matches!(
            verify(&short, &i, 2, rat(1, 1)),
            Err(Violation::WrongAmount { job: 0, .. })
        ));

        // machine index outside the fleet
        let wide = vec![piece(3, 0, 0, 2), piece(2, 1, 0, 2)];
        assert!(matches!(
            verify(&wide, &i, 2, rat(1, 1)),
            Err(Violation::BadMachine(3, 2))
        ));

        // unknown job id
        let ghost = vec![piece(1, 7, 0, 2)];
        assert!(matches!(
            verify(&ghost, &i, 2, rat(1, 1)),
            Err(Violation::UnknownJob(7))
        ));
    }

    #[test]
    fn lookahead_answers_match_direct_simulation() {
        // feasible standing work
        let s = PolicyScheduler::edf(1);
        let alive = vec![AliveJob {
            job: job(0, 0, 4, 4),
            remaining: TimePoint::from_int(2),
        }];
        assert!(lookahead_feasible(
            Box::new(s.clone()),
            alive,
            TimePoint::from_int(1),
            rat(1, 1)
        ));
        // too much standing work
        let alive = vec![
            AliveJob {
                job: job(0, 0, 4, 4),
                remaining: TimePoint::from_int(3),
            },
            AliveJob {
                job: job(1, 0, 4, 4),
                remaining: TimePoint::from_int(3),
            },
        ];
        assert!(!lookahead_feasible(
            Box::new(s),
            alive,
            TimePoint::from_int(1),
            rat(1, 1)
        ));
    }

    #[test]
    fn conservation_across_random_instances() {
        use crate::oracle::random_small;
        for seed in 0..60u64 {
            let i = random_small(seed, 5, 12, 4);
            let m = i.len().max(1);
            let r = run_edf(&i, m);
            // with one machine per job nothing can be late
            assert!(r.feasible, "seed {seed}");
            assert!(verify(&r.schedule, &i, m, rat(1, 1)).is_ok(), "seed {seed}");
            for j in i.jobs() {
                let total: TimePoint = r
                    .schedule
                    .iter()
                    .filter(|p| p.job == j.id)
                    .fold(TimePoint::ZERO, |acc, p| acc + p.interval.length());
                assert_eq!(total, j.size(), "seed {seed} job {}", j.id);
            }
        }
    }
}
