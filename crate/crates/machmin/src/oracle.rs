//! Offline feasibility oracle.
//!
//! Preemptive migratory scheduling of jobs with releases and deadlines on m
//! identical machines reduces to a max-flow problem: cut the timeline at
//! every release and deadline, connect each job to the slots inside its
//! lifespan (a job processes at most speed * length work per slot, one
//! machine at a time), cap each slot at m * speed * length, and ask whether
//! all work fits. With speed a/b every capacity becomes an integer after
//! scaling by b, so the whole test is exact.
//!
//! `brute_force_min_machines` is a deliberately naive unit-slot enumeration
//! kept as an independent ground truth for the flow construction; the two
//! share no code and no assumptions beyond the problem statement.

use crate::engine::SchedulePiece;
use crate::job::{Instance, Job, JobId};
use crate::time::{Interval, Rat, TimePoint};
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;

/// Seeded tiny instance (1..=n_max jobs inside the horizon), sized so the
/// brute-force checker stays fast. Meant for cross-validation loops.
pub fn random_small(seed: u64, n_max: usize, horizon: i64, p_max: i64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=n_max);
    let jobs = (0..n)
        .map(|i| {
            let r = rng.gen_range(0..horizon);
            let span = rng.gen_range(1..=(horizon - r).min(p_max.max(1) * 3));
            let p = rng.gen_range(1..=span.min(p_max));
            Job::new(i as JobId, r, r + span, p)
        })
        .collect();
    Instance::new(jobs).unwrap()
}

#[derive(Debug, Clone)]
pub struct FeasibilityResult {
    pub feasible: bool,
    /// Total work the flow places, in work units; equals the instance's
    /// total work exactly when feasible.
    pub max_flow_value: Rat,
    /// A concrete feasible schedule (only on request, only when feasible).
    pub witness: Option<Vec<SchedulePiece>>,
    /// When infeasible: a window whose mandatory work exceeds machine
    /// capacity, with the amount of the overload. Not every infeasible
    /// instance has a single-window witness, so this can be None.
    pub deficit: Option<(Interval, Rat)>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("brute force guard: needs n <= 6 and time span <= 16, got n = {n}, span = {span}")]
    BruteForceGuard { n: usize, span: i64 },
    #[error("job {id} cannot finish even alone at speed {speed}; no machine count suffices")]
    JobCannotFit { id: JobId, speed: String },
    #[error("speed must be a positive rational")]
    BadSpeed,
}

/// Dinic's max flow over integer capacities.
struct FlowNet {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<i128>,
}

impl FlowNet {
    fn new(nodes: usize) -> FlowNet {
        FlowNet {
            adj: vec![Vec::new(); nodes],
            to: Vec::new(),
            cap: Vec::new(),
        }
    }

    /// Returns the forward edge index; the paired reverse edge is index ^ 1.
    fn add_edge(&mut self, u: usize, v: usize, c: i128) -> usize {
        let e = self.to.len();
        self.to.push(v);
        self.cap.push(c);
        self.adj[u].push(e);
        self.to.push(u);
        self.cap.push(0);
        self.adj[v].push(e + 1);
        e
    }

    fn flow_on(&self, e: usize) -> i128 {
        self.cap[e ^ 1]
    }

    fn bfs(&self, s: usize, t: usize, level: &mut [i32]) -> bool {
        level.fill(-1);
        level[s] = 0;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let v = self.to[e];
                if self.cap[e] > 0 && level[v] < 0 {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        level[t] >= 0
    }

    fn dfs(&mut self, u: usize, t: usize, pushed: i128, level: &[i32], it: &mut [usize]) -> i128 {
        if u == t {
            return pushed;
        }
        while it[u] < self.adj[u].len() {
            let e = self.adj[u][it[u]];
            let v = self.to[e];
            if self.cap[e] > 0 && level[v] == level[u] + 1 {
                let got = self.dfs(v, t, pushed.min(self.cap[e]), level, it);
                if got > 0 {
                    self.cap[e] -= got;
                    self.cap[e ^ 1] += got;
                    return got;
                }
            }
            it[u] += 1;
        }
        0
    }

    fn max_flow(&mut self, s: usize, t: usize) -> i128 {
        let n = self.adj.len();
        let mut level = vec![-1i32; n];
        let mut total = 0i128;
        while self.bfs(s, t, &mut level) {
            let mut it = vec![0usize; n];
            loop {
                let got = self.dfs(s, t, i128::MAX, &level, &mut it);
                if got == 0 {
                    break;
                }
                total += got;
            }
        }
        total
    }
}

fn event_points(inst: &Instance) -> Vec<i64> {
    let mut ev: Vec<i64> = inst
        .jobs()
        .iter()
        .flat_map(|j| [j.r, j.d])
        .collect();
    ev.sort_unstable();
    ev.dedup();
    ev
}

/// Exact feasibility of `inst` on `m` machines of speed `speed`.
pub fn feasible(inst: &Instance, m: u32, speed: Rat, want_witness: bool) -> FeasibilityResult {
    assert!(speed.is_positive(), "speed must be positive");
    let jobs = inst.jobs();
    let total_work: i128 = jobs.iter().map(|j| j.p as i128).sum();
    if jobs.is_empty() {
        return FeasibilityResult {
            feasible: true,
            max_flow_value: Rat::zero(),
            witness: if want_witness { Some(Vec::new()) } else { None },
            deficit: None,
        };
    }

    let a = *speed.numer();
    let b = *speed.denom();
    let ev = event_points(inst);
    let slots: Vec<(i64, i64)> = ev.windows(2).map(|w| (w[0], w[1])).collect();

    // Nodes: source, jobs, slots, sink. Capacities scaled by b so they are
    // integers: job supply p*b, job->slot a*len, slot->sink m*a*len.
    let n = jobs.len();
    let source = 0;
    let sink = n + slots.len() + 1;
    let mut net = FlowNet::new(sink + 1);
    let mut job_slot_edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n]; // (slot idx, edge)
    for (ji, j) in jobs.iter().enumerate() {
        net.add_edge(source, 1 + ji, j.p as i128 * b);
        for (si, &(s0, s1)) in slots.iter().enumerate() {
            if j.r <= s0 && s1 <= j.d {
                let e = net.add_edge(1 + ji, 1 + n + si, a * (s1 - s0) as i128);
                job_slot_edges[ji].push((si, e));
            }
        }
    }
    for (si, &(s0, s1)) in slots.iter().enumerate() {
        net.add_edge(1 + n + si, sink, m as i128 * a * (s1 - s0) as i128);
    }

    let flow = net.max_flow(source, sink);
    let ok = flow == total_work * b;
    let witness = if ok && want_witness {
        Some(extract_witness(inst, speed, &slots, &net, &job_slot_edges))
    } else {
        None
    };
    let deficit = if ok { None } else { worst_window(inst, m, speed) };
    FeasibilityResult {
        feasible: ok,
        max_flow_value: Rat::new(flow, b),
        witness,
        deficit,
    }
}

/// Pack per-slot work assignments into machine pieces by McNaughton's
/// wrap-around rule: lay jobs end to end across machines; the per-job cap
/// speed*len guarantees a wrapped job's two pieces never overlap in time.
fn extract_witness(
    inst: &Instance,
    speed: Rat,
    slots: &[(i64, i64)],
    net: &FlowNet,
    job_slot_edges: &[Vec<(usize, usize)>],
) -> Vec<SchedulePiece> {
    let b = *speed.denom();
    let jobs = inst.jobs();
    // work[slot][job index] in work units
    let mut per_slot: Vec<Vec<(usize, Rat)>> = vec![Vec::new(); slots.len()];
    for (ji, edges) in job_slot_edges.iter().enumerate() {
        for &(si, e) in edges {
            let f = net.flow_on(e);
            if f > 0 {
                per_slot[si].push((ji, Rat::new(f, b)));
            }
        }
    }
    let mut pieces = Vec::new();
    for (si, works) in per_slot.iter().enumerate() {
        let (s0, s1) = slots[si];
        let start = TimePoint::from_int(s0);
        let machine_cap = Rat::from_integer((s1 - s0) as i128) * speed; // work per machine
        let mut cum = Rat::zero();
        for &(ji, w) in works {
            let lo = cum;
            let hi = cum + w;
            cum = hi;
            let mi = (lo / machine_cap).floor().to_integer();
            let boundary = Rat::from_integer(mi + 1) * machine_cap;
            let base = Rat::from_integer(mi) * machine_cap;
            let job = jobs[ji].id;
            if hi <= boundary {
                pieces.push(SchedulePiece {
                    machine: (mi + 1) as usize,
                    job,
                    interval: Interval::new(
                        start + TimePoint::from((lo - base) / speed),
                        start + TimePoint::from((hi - base) / speed),
                    ),
                });
            } else {
                pieces.push(SchedulePiece {
                    machine: (mi + 1) as usize,
                    job,
                    interval: Interval::new(
                        start + TimePoint::from((lo - base) / speed),
                        TimePoint::from_int(s1),
                    ),
                });
                pieces.push(SchedulePiece {
                    machine: (mi + 2) as usize,
                    job,
                    interval: Interval::new(start, start + TimePoint::from((hi - boundary) / speed)),
                });
            }
        }
    }
    pieces.sort_by_key(|p| (p.interval.start, p.machine));
    pieces
}

/// The most overloaded window [a, b): mandatory work that must run inside
/// the window (work that cannot fit in the job's lifespan outside it) minus
/// machine capacity. Returns the max-excess window if any excess exists.
fn worst_window(inst: &Instance, m: u32, speed: Rat) -> Option<(Interval, Rat)> {
    let ev = event_points(inst);
    let mut best: Option<(Interval, Rat)> = None;
    for (i, &a) in ev.iter().enumerate() {
        for &b in &ev[i + 1..] {
            let mut mandatory = Rat::zero();
            for j in inst.jobs() {
                let before = (a - j.r).max(0).min(j.d - j.r);
                let after = (j.d - b).max(0).min(j.d - j.r);
                let outside = Rat::from_integer((before + after) as i128) * speed;
                let need = Rat::from_integer(j.p as i128) - outside;
                if need.is_positive() {
                    mandatory += need;
                }
            }
            let cap = Rat::from_integer(m as i128) * speed * Rat::from_integer((b - a) as i128);
            let excess = mandatory - cap;
            if excess.is_positive() && best.as_ref().map_or(true, |(_, e)| excess > *e) {
                best = Some((Interval::from_ints(a, b), excess));
            }
        }
    }
    best
}

/// Largest over event-point windows [a, b] of ceil(work fully contained /
/// window length): every schedule needs at least this many unit-speed
/// machines.
pub fn demand_lower_bound(inst: &Instance) -> u32 {
    let ev = event_points(inst);
    let mut best: i64 = 0;
    for (i, &a) in ev.iter().enumerate() {
        for &b in &ev[i + 1..] {
            let contained: i64 = inst
                .jobs()
                .iter()
                .filter(|j| j.r >= a && j.d <= b)
                .map(|j| j.p)
                .sum();
            let bound = (contained + (b - a) - 1).div_euclid(b - a);
            best = best.max(bound);
        }
    }
    best as u32
}

/// Smallest machine count feasible at the given speed. Binary search over
/// [demand lower bound, n]; feasibility is monotone in m, and n machines
/// always suffice when every job fits its own lifespan at this speed
/// (guaranteed for speed >= 1, checked explicitly otherwise).
pub fn min_machines(inst: &Instance, speed: Rat) -> Result<u32, OracleError> {
    if !speed.is_positive() {
        return Err(OracleError::BadSpeed);
    }
    if inst.is_empty() {
        return Ok(0);
    }
    for j in inst.jobs() {
        if Rat::from_integer(j.p as i128) > speed * Rat::from_integer(j.span() as i128) {
            return Err(OracleError::JobCannotFit {
                id: j.id,
                speed: crate::time::format_rat(speed),
            });
        }
    }
    let mut lo = if speed == Rat::from_integer(1) {
        demand_lower_bound(inst).max(1)
    } else {
        1
    };
    let mut hi = inst.len() as u32;
    debug_assert!(feasible(inst, hi, speed, false).feasible);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if feasible(inst, mid, speed, false).feasible {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(lo)
}

/// Independent ground truth for small cases: exhaustive search over
/// per-unit-slot assignments at speed 1 (with integer data, some feasible
/// schedule processes each job an integral amount per unit slot, so unit
/// granularity loses nothing). Guarded to n <= 6 and span <= 16.
pub fn brute_force_min_machines(inst: &Instance) -> Result<u32, OracleError> {
    let n = inst.len();
    if n == 0 {
        return Ok(0);
    }
    let t0 = inst.min_release().unwrap();
    let t1 = inst.max_deadline().unwrap();
    let span = t1 - t0;
    if n > 6 || span > 16 {
        return Err(OracleError::BruteForceGuard { n, span });
    }
    for m in 1..=n as u32 {
        if bf_feasible(inst, m, t0, t1) {
            return Ok(m);
        }
    }
    // n machines always work at speed 1: every job fits its own lifespan.
    Ok(n as u32)
}

struct BruteForce<'a> {
    jobs: &'a [crate::job::Job],
    m: usize,
    t0: i64,
    t1: i64,
    failed: HashSet<u64>,
}

fn bf_feasible(inst: &Instance, m: u32, t0: i64, t1: i64) -> bool {
    let rems: Vec<i64> = inst.jobs().iter().map(|j| j.p).collect();
    let mut bf = BruteForce {
        jobs: inst.jobs(),
        m: m as usize,
        t0,
        t1,
        failed: HashSet::new(),
    };
    bf.search(t0, &rems)
}

impl BruteForce<'_> {
    fn key(&self, t: i64, rems: &[i64]) -> u64 {
        // span <= 16 and each remaining <= 16: everything fits in 5-bit fields
        let mut key = (t - self.t0) as u64;
        for &r in rems {
            key = (key << 5) | r as u64;
        }
        key
    }

    fn search(&mut self, t: i64, rems: &[i64]) -> bool {
        if rems.iter().all(|&r| r == 0) {
            return true;
        }
        if t >= self.t1 {
            return false;
        }
        // necessary: each unfinished job must fit between now (or its
        // release) and its deadline even if it then runs in every slot
        for (j, &rem) in self.jobs.iter().zip(rems) {
            if rem > 0 && rem > j.d - t.max(j.r) {
                return false;
            }
        }
        let key = self.key(t, rems);
        if self.failed.contains(&key) {
            return false;
        }
        let alive: Vec<usize> = (0..self.jobs.len())
            .filter(|&i| rems[i] > 0 && self.jobs[i].r <= t && self.jobs[i].d > t)
            .collect();
        // processing a maximal set of alive jobs never hurts (feasibility is
        // monotone in the remaining-work vector), so try size-k subsets only
        let k = self.m.min(alive.len());
        let mut chosen = vec![0usize; k];
        if self.subsets(t, rems, &alive, k, 0, &mut chosen) {
            return true;
        }
        self.failed.insert(key);
        false
    }

    fn subsets(
        &mut self,
        t: i64,
        rems: &[i64],
        alive: &[usize],
        k: usize,
        depth: usize,
        chosen: &mut [usize],
    ) -> bool {
        if depth == k {
            let mut next: Vec<i64> = rems.to_vec();
            for &pos in chosen.iter() {
                next[alive[pos]] -= 1;
            }
            return self.search(t + 1, &next);
        }
        // chosen holds positions into alive, in increasing order
        let start = if depth == 0 { 0 } else { chosen[depth - 1] + 1 };
        for pos in start..=(alive.len() - (k - depth)) {
            chosen[depth] = pos;
            if self.subsets(t, rems, alive, k, depth + 1, chosen) {
                return true;
            }
        }
        false
    }
}
