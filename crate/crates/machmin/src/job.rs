//! Jobs and instances.
//!
//! A job is a triple (release, deadline, size) of integers; it may be
//! preempted and migrated freely but never runs on two machines at once.
//! The lifespan is the half-open window [r, d). Laxity l = d - r - p is the
//! total time a job can afford to wait; relative laxity l / (d - r) is the
//! scale-free version all routing decisions are based on.

use crate::time::{Interval, Rat, TimePoint};
use serde::{Deserialize, Serialize};

pub type JobId = u32;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Job {
    pub id: JobId,
    /// Release time (integer).
    pub r: i64,
    /// Deadline (integer), d >= r + p.
    pub d: i64,
    /// Processing requirement (integer), p >= 1.
    pub p: i64,
}

impl Job {
    pub fn new(id: JobId, r: i64, d: i64, p: i64) -> Job {
        Job { id, r, d, p }
    }

    /// Lifespan [r, d) as an interval.
    pub fn lifespan(&self) -> Interval {
        Interval::from_ints(self.r, self.d)
    }

    pub fn span(&self) -> i64 {
        self.d - self.r
    }

    pub fn release(&self) -> TimePoint {
        TimePoint::from_int(self.r)
    }

    pub fn deadline(&self) -> TimePoint {
        TimePoint::from_int(self.d)
    }

    pub fn size(&self) -> TimePoint {
        TimePoint::from_int(self.p)
    }

    /// Laxity d - r - p: total waiting a job survives.
    pub fn laxity(&self) -> i64 {
        self.d - self.r - self.p
    }

    /// Relative laxity laxity / span, always in [0, 1).
    pub fn relative_laxity(&self) -> Rat {
        Rat::new(self.laxity() as i128, self.span() as i128)
    }

    /// A job is alpha-tight when p > alpha * span. The boundary
    /// p == alpha * span counts as loose.
    pub fn is_alpha_tight(&self, alpha: Rat) -> bool {
        Rat::from_integer(self.p as i128) > alpha * Rat::from_integer(self.span() as i128)
    }

    fn validate(&self) -> Result<(), InstanceError> {
        if self.p < 1 {
            return Err(InstanceError::BadJob {
                id: self.id,
                why: "size must be at least 1",
            });
        }
        if self.d < self.r + self.p {
            return Err(InstanceError::BadJob {
                id: self.id,
                why: "deadline must leave room for the full size (d >= r + p)",
            });
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum InstanceError {
    #[error("job {id}: {why}")]
    BadJob { id: JobId, why: &'static str },
    #[error("duplicate job id {0}")]
    DuplicateId(JobId),
}

/// An ordered set of jobs, sorted by (release, id). The list order is the
/// global tie-break: wherever two jobs compare equal under a policy key,
/// the smaller id wins unless an algorithm states otherwise.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    jobs: Vec<Job>,
}

impl Instance {
    /// Validates invariants; sorts jobs into canonical (release, id) order.
    pub fn new(mut jobs: Vec<Job>) -> Result<Instance, InstanceError> {
        for j in &jobs {
            j.validate()?;
        }
        jobs.sort_by_key(|j| (j.r, j.id));
        let mut ids: Vec<JobId> = jobs.iter().map(|j| j.id).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(InstanceError::DuplicateId(w[0]));
        }
        Ok(Instance { jobs })
    }

    pub fn jobs(&self) -> &[Job] {
        &self.jobs
    }

    pub fn len(&self) -> usize {
        self.jobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jobs.is_empty()
    }

    pub fn job(&self, id: JobId) -> Option<&Job> {
        self.jobs.iter().find(|j| j.id == id)
    }

    pub fn total_work(&self) -> i64 {
        self.jobs.iter().map(|j| j.p).sum()
    }

    pub fn min_release(&self) -> Option<i64> {
        self.jobs.iter().map(|j| j.r).min()
    }

    pub fn max_deadline(&self) -> Option<i64> {
        self.jobs.iter().map(|j| j.d).max()
    }

    /// Serialize to the canonical JSON file format.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serialization cannot fail")
    }

    /// Parse the JSON file format; unknown fields are rejected, invariants
    /// re-validated.
    pub fn from_json(s: &str) -> Result<Instance, InstanceLoadError> {
        let raw: Instance = serde_json::from_str(s)?;
        Instance::new(raw.jobs).map_err(InstanceLoadError::Invalid)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum InstanceLoadError {
    #[error("malformed instance file: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Invalid(InstanceError),
}
