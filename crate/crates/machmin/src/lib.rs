//! Online machine minimization: schedulers that rent machines on the fly for
//! jobs with release times and hard deadlines, plus the tooling to judge them
//! — an exact offline oracle, a discrete-event engine with schedule
//! verification, infeasibility certificates, and seeded instance generators.

pub mod certify;
pub mod engine;
pub mod gen;
pub mod job;
pub mod oracle;
pub mod route;
pub mod schedulers;
pub mod time;

pub use certify::{
    check_critical, check_weakly_critical, extract_sjf_certificate,
    extract_sjf_certificate_with_range, implied_lower_bound, rational_log, sjf_machine_bound,
    BoundError, BoundValue, CertifyError, CriticalPair, ExtractError, Rejection, Verdict,
};
pub use engine::{
    lookahead_feasible, resume, simulate, simulation_lookahead, verify, MissInfo, RunResult,
    SchedulePiece, StopPolicy, Violation,
};
pub use gen::{generate, p_ratio, GenError, GenKind, GenSpec};
pub use job::{Instance, InstanceError, Job, JobId};
pub use oracle::{brute_force_min_machines, demand_lower_bound, feasible, min_machines, OracleError};
pub use route::{bucket_count, max_pow2_shift, route, Route};
pub use schedulers::{
    edf_assignment, sjf_assignment, sub_cms, AdaptiveConfig, AdaptiveHybrid, AliveJob, Assignment,
    CmsScheduler, CmsStep, CmsTraceEntry, CmsTraceJob, DoublingScheduler, Failure, HybridConfig,
    HybridScheduler, LookaheadFn, OnlineScheduler, PolicyScheduler, SchedulerFactory,
};
pub use time::{rat, Interval, Rat, TimePoint};
