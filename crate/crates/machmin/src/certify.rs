//! Lower-bound witnesses and their checkers.
//!
//! A witness pair names a set of jobs G and a set of disjoint time
//! intervals T and claims: every instant of T lies inside at least mu job
//! lifespans from G, every job in G is alpha-tight (its size exceeds alpha
//! times its window), and T overlaps each job's window for at least beta of
//! that job's slack (or, in the weak form, |T| is at least beta/mu times
//! the total slack). Such a pair certifies that no scheduler - offline or
//! online - can get away with few machines, so accepted pairs turn observed
//! scheduler failures into machine-count lower bounds.
//!
//! Coverage is checked exactly on the finite subdivision induced by all
//! interval and lifespan endpoints: coverage is constant on each elementary
//! interval, so checking one point per piece equals checking every point.
//! All measures are exact rationals.

use crate::engine::RunResult;
use crate::job::{Instance, JobId};
use crate::time::{clip, normalize, subtract, total_length, Interval, Rat, TimePoint};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;

/// A machine-count lower-bound witness: job set G, time set T, coverage
/// target mu, slack-share target beta, tightness level alpha.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticalPair {
    #[serde(rename = "G")]
    pub jobs: BTreeSet<JobId>,
    #[serde(rename = "T", with = "interval_pairs")]
    pub times: Vec<Interval>,
    pub mu: u32,
    #[serde(with = "crate::time::rat_serde")]
    pub beta: Rat,
    #[serde(with = "crate::time::rat_serde")]
    pub alpha: Rat,
}

/// T serializes as [[start, end], ...] with rational-string endpoints.
mod interval_pairs {
    use super::Interval;
    use crate::time::TimePoint;
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Interval], s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<(TimePoint, TimePoint)> = v.iter().map(|iv| (iv.start, iv.end)).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Interval>, D::Error> {
        let pairs: Vec<(TimePoint, TimePoint)> = Vec::deserialize(d)?;
        pairs
            .into_iter()
            .map(|(a, b)| {
                if a < b {
                    Ok(Interval { start: a, end: b })
                } else {
                    Err(D::Error::custom(format!(
                        "empty or reversed interval [{a}, {b})"
                    )))
                }
            })
            .collect()
    }
}

impl CriticalPair {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("pair serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<CriticalPair, CertifyError> {
        let pair: CriticalPair =
            serde_json::from_str(s).map_err(|e| CertifyError::Json(e.to_string()))?;
        pair.validate()?;
        Ok(pair)
    }

    /// Structural invariants, independent of any instance.
    pub fn validate(&self) -> Result<(), CertifyError> {
        if self.times.is_empty() {
            return Err(CertifyError::Malformed("time set is empty"));
        }
        for iv in &self.times {
            if iv.end <= iv.start {
                return Err(CertifyError::Malformed("interval with non-positive length"));
            }
        }
        for w in self.times.windows(2) {
            if w[1].start < w[0].end {
                return Err(CertifyError::Malformed(
                    "intervals must be sorted and pairwise disjoint",
                ));
            }
        }
        if self.mu < 1 {
            return Err(CertifyError::Malformed("mu must be at least 1"));
        }
        if !self.beta.is_positive() || self.beta > Rat::one() {
            return Err(CertifyError::Malformed("beta must be in (0, 1]"));
        }
        if !self.alpha.is_positive() || self.alpha >= Rat::one() {
            return Err(CertifyError::Malformed("alpha must be in (0, 1)"));
        }
        Ok(())
    }

    pub fn measure(&self) -> TimePoint {
        total_length(&self.times)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CertifyError {
    #[error("witness references unknown job id {0}")]
    UnknownJob(JobId),
    #[error("malformed witness: {0}")]
    Malformed(&'static str),
    #[error("malformed witness file: {0}")]
    Json(String),
}

/// Why a structurally valid pair fails to certify anything.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rejection {
    /// A job in G is not alpha-tight.
    NotTight { job: JobId },
    /// A point of T covered by fewer than mu lifespans.
    Coverage {
        at: TimePoint,
        have: usize,
        need: u32,
    },
    /// |T ∩ window(job)| < beta * slack(job).
    JobShare { job: JobId, have: Rat, need: Rat },
    /// |T| < (beta / mu) * total slack of G.
    TotalShare { have: Rat, need: Rat },
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rejection::NotTight { job } => write!(f, "tightness: job {job} is not alpha-tight"),
            Rejection::Coverage { at, have, need } => {
                write!(f, "coverage: time {at} lies in {have} lifespans, needs {need}")
            }
            Rejection::JobShare { job, have, need } => {
                write!(f, "slack share: job {job} overlaps T for {have}, needs {need}")
            }
            Rejection::TotalShare { have, need } => {
                write!(f, "total slack share: |T| = {have}, needs {need}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Accepted,
    Rejected(Rejection),
}

impl Verdict {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Verdict::Accepted)
    }

    pub fn rejection(&self) -> Option<&Rejection> {
        match self {
            Verdict::Accepted => None,
            Verdict::Rejected(r) => Some(r),
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Accepted => write!(f, "accepted"),
            Verdict::Rejected(r) => write!(f, "rejected ({r})"),
        }
    }
}

/// The strong form: per-job slack shares.
pub fn check_critical(pair: &CriticalPair, inst: &Instance) -> Result<Verdict, CertifyError> {
    check(pair, inst, Form::PerJob)
}

/// The weak form: one aggregate slack share across G.
pub fn check_weakly_critical(
    pair: &CriticalPair,
    inst: &Instance,
) -> Result<Verdict, CertifyError> {
    check(pair, inst, Form::Aggregate)
}

enum Form {
    PerJob,
    Aggregate,
}

fn check(pair: &CriticalPair, inst: &Instance, form: Form) -> Result<Verdict, CertifyError> {
    pair.validate()?;
    let jobs: Vec<&crate::job::Job> = pair
        .jobs
        .iter()
        .map(|id| inst.job(*id).ok_or(CertifyError::UnknownJob(*id)))
        .collect::<Result<_, _>>()?;

    // 1. tightness
    for j in &jobs {
        if !j.is_alpha_tight(pair.alpha) {
            return Ok(Verdict::Rejected(Rejection::NotTight { job: j.id }));
        }
    }

    // 2. coverage on the endpoint subdivision
    let mut points: Vec<TimePoint> = Vec::new();
    for iv in &pair.times {
        points.push(iv.start);
        points.push(iv.end);
    }
    for j in &jobs {
        points.push(j.release());
        points.push(j.deadline());
    }
    points.sort();
    points.dedup();
    for w in points.windows(2) {
        let x = w[0];
        if !pair.times.iter().any(|iv| iv.contains_point(x)) {
            continue;
        }
        let have = jobs.iter().filter(|j| j.lifespan().contains_point(x)).count();
        if have < pair.mu as usize {
            return Ok(Verdict::Rejected(Rejection::Coverage {
                at: x,
                have,
                need: pair.mu,
            }));
        }
    }

    // 3. slack shares
    match form {
        Form::PerJob => {
            for j in &jobs {
                let have = total_length(&clip(&pair.times, &j.lifespan())).as_rat();
                let need = pair.beta * Rat::from_integer(j.laxity() as i128);
                if have < need {
                    return Ok(Verdict::Rejected(Rejection::JobShare {
                        job: j.id,
                        have,
                        need,
                    }));
                }
            }
        }
        Form::Aggregate => {
            let slack: i128 = jobs.iter().map(|j| j.laxity() as i128).sum();
            let have = pair.measure().as_rat();
            let need = pair.beta * Rat::from_integer(slack) / Rat::from_integer(pair.mu as i128);
            if have < need {
                return Ok(Verdict::Rejected(Rejection::TotalShare { have, need }));
            }
        }
    }
    Ok(Verdict::Accepted)
}

// ---------------------------------------------------------------------------
// witness extraction from a failing run
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExtractError {
    #[error("the run has no deadline miss to certify")]
    NoMiss,
    #[error("the missed job {0} is not in the instance")]
    VictimUnknown(JobId),
    #[error("job {0} has zero slack, the slack-share target would be zero")]
    ZeroMinimumLaxity(JobId),
    #[error("job {job} has relative slack {rho}, outside the declared range ({lo}, {hi}]")]
    OutsideRange {
        job: JobId,
        rho: Rat,
        lo: Rat,
        hi: Rat,
    },
    #[error("declared slack range is invalid (need 0 < lo <= hi <= 1/2)")]
    BadRange,
    #[error("the missed job ran through its whole window; nothing to certify")]
    NoIdleTime,
}

/// Turn a shortest-job-first failure into a lower-bound witness using the
/// canonical slack-range ceiling 1/2: T is the set of times the missed job
/// sat idle inside its window, G the jobs that ran during T, mu the fleet
/// size, beta = lo/(5*hi) for the attained range floor lo, alpha = 1 - hi.
pub fn extract_sjf_certificate(
    run: &RunResult,
    inst: &Instance,
) -> Result<CriticalPair, ExtractError> {
    let lo = inst
        .jobs()
        .iter()
        .map(|j| j.relative_laxity())
        .min()
        .unwrap_or_else(Rat::zero);
    extract_sjf_certificate_with_range(run, inst, lo, Rat::new(1, 2))
}

/// Same extraction with an explicitly declared slack range [lo, hi].
pub fn extract_sjf_certificate_with_range(
    run: &RunResult,
    inst: &Instance,
    lo: Rat,
    hi: Rat,
) -> Result<CriticalPair, ExtractError> {
    if !(lo.is_positive() && lo <= hi && hi <= Rat::new(1, 2)) {
        if let Some(j) = inst.jobs().iter().find(|j| j.laxity() == 0) {
            return Err(ExtractError::ZeroMinimumLaxity(j.id));
        }
        return Err(ExtractError::BadRange);
    }
    for j in inst.jobs() {
        let rho = j.relative_laxity();
        if rho < lo || rho > hi {
            return Err(ExtractError::OutsideRange {
                job: j.id,
                rho,
                lo,
                hi,
            });
        }
    }
    let miss = run.miss.as_ref().ok_or(ExtractError::NoMiss)?;
    let victim = inst
        .job(miss.job)
        .ok_or(ExtractError::VictimUnknown(miss.job))?;

    let window = victim.lifespan();
    let ran: Vec<Interval> = normalize(
        &run.schedule
            .iter()
            .filter(|p| p.job == victim.id)
            .map(|p| p.interval)
            .collect::<Vec<_>>(),
    );
    let idle = subtract(&[window], &ran);
    if idle.is_empty() {
        return Err(ExtractError::NoIdleTime);
    }

    let others: BTreeSet<JobId> = run
        .schedule
        .iter()
        .filter(|p| p.job != victim.id)
        .filter(|p| idle.iter().any(|iv| iv.overlaps(&p.interval)))
        .map(|p| p.job)
        .collect();

    Ok(CriticalPair {
        jobs: others,
        times: idle,
        mu: run.machines_open as u32,
        beta: lo / (Rat::from_integer(5) * hi),
        alpha: Rat::one() - hi,
    })
}

// ---------------------------------------------------------------------------
// closed-form bound calculators
// ---------------------------------------------------------------------------

/// A reported bound: exact when the underlying logarithm is rational,
/// a float otherwise, or unbounded where the expression diverges.
#[derive(Clone, Debug, PartialEq)]
pub enum BoundValue {
    Exact(Rat),
    Approx(f64),
    Unbounded,
}

impl BoundValue {
    pub fn as_f64(&self) -> f64 {
        match self {
            BoundValue::Exact(r) => rat_f64(*r),
            BoundValue::Approx(v) => *v,
            BoundValue::Unbounded => f64::INFINITY,
        }
    }
}

impl fmt::Display for BoundValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundValue::Exact(r) => write!(f, "{r}"),
            BoundValue::Approx(v) => write!(f, "{v:.6}"),
            BoundValue::Unbounded => write!(f, "unbounded"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BoundError {
    #[error("parameter {0} out of range")]
    OutOfRange(&'static str),
}

fn rat_f64(r: Rat) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// log_base(val) as an exact rational p/q when base^p == val^q for small
/// integers, verified in arbitrary precision; None when no small rational
/// exponent matches. Requires base > 1 and val > 1.
pub fn rational_log(base: Rat, val: Rat) -> Option<Rat> {
    debug_assert!(base > Rat::one() && val > Rat::one());
    let big = |r: Rat| BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()));
    let x = rat_f64(val).ln() / rat_f64(base).ln();
    for q in 1i64..=24 {
        let p = (x * q as f64).round();
        if !(1.0..=512.0).contains(&p) {
            continue;
        }
        let p = p as i64;
        if big(base).pow(p as i32) == big(val).pow(q as i32) {
            return Some(Rat::new(p as i128, q as i128));
        }
    }
    None
}

/// The machine-count lower bound a witness implies:
/// mu / log_{1/(1-alpha)}(1/beta). Diverges to Unbounded as beta reaches 1.
pub fn implied_lower_bound(mu: u32, beta: Rat, alpha: Rat) -> Result<BoundValue, BoundError> {
    if mu < 1 {
        return Err(BoundError::OutOfRange("mu"));
    }
    if !beta.is_positive() || beta > Rat::one() {
        return Err(BoundError::OutOfRange("beta"));
    }
    if !alpha.is_positive() || alpha >= Rat::one() {
        return Err(BoundError::OutOfRange("alpha"));
    }
    if beta == Rat::one() {
        return Ok(BoundValue::Unbounded);
    }
    let base = Rat::one() / (Rat::one() - alpha);
    let val = Rat::one() / beta;
    Ok(match rational_log(base, val) {
        Some(l) => BoundValue::Exact(Rat::from_integer(mu as i128) / l),
        None => BoundValue::Approx(mu as f64 / (rat_f64(val).ln() / rat_f64(base).ln())),
    })
}

/// The machine blow-up ceiling for shortest-job-first on jobs whose
/// relative slack stays within [lo, hi]: log_{1/hi}(5*hi/lo).
pub fn sjf_machine_bound(lo: Rat, hi: Rat) -> Result<BoundValue, BoundError> {
    if !lo.is_positive() {
        return Err(BoundError::OutOfRange("lo"));
    }
    if lo > hi || hi > Rat::new(1, 2) {
        return Err(BoundError::OutOfRange("hi"));
    }
    let base = Rat::one() / hi;
    let val = Rat::from_integer(5) * hi / lo;
    Ok(match rational_log(base, val) {
        Some(l) => BoundValue::Exact(l),
        None => BoundValue::Approx(rat_f64(val).ln() / rat_f64(base).ln()),
    })
}
