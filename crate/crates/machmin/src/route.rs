//! Relative-laxity routing.
//!
//! The hybrid algorithm splits jobs three ways by relative laxity rho:
//! rho <= 1/m* goes to the budget-burning scheduler (CMS), rho >= 1/4 goes
//! to EDF, and the middle band goes to one of ceil(lg lg m*) SJF buckets,
//! bucket i covering (1/2^(2^(i+1)), 1/2^(2^i)]. CMS wins wherever bands
//! overlap (for small m* and for deep buckets dipping below 1/m*).

use crate::job::Job;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub enum Route {
    Edf,
    /// SJF bucket index, 1-based.
    Sjf(u32),
    Cms,
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Route::Edf => write!(f, "edf"),
            Route::Sjf(i) => write!(f, "sjf[{}]", i),
            Route::Cms => write!(f, "cms"),
        }
    }
}

/// Smallest k with 2^(2^k) >= x, i.e. ceil(lg lg x), as pure integer
/// arithmetic: apply ceil(log2) twice.
fn ceil_log2(x: u64) -> u32 {
    debug_assert!(x >= 1);
    if x <= 1 {
        0
    } else {
        u64::BITS - (x - 1).leading_zeros()
    }
}

/// Number of SJF buckets for a machine-count estimate: max(0, ceil(lg lg m*)),
/// zero when m* <= 2.
pub fn bucket_count(m_star: u32) -> u32 {
    if m_star <= 2 {
        0
    } else {
        ceil_log2(ceil_log2(m_star as u64) as u64)
    }
}

/// Largest e >= 0 with a * 2^e <= b (for 0 < a <= b). This lets bucket
/// membership rho <= 1/2^e be decided exactly without ever materializing
/// 2^128-sized denominators.
pub fn max_pow2_shift(a: u128, b: u128) -> u32 {
    debug_assert!(a >= 1 && a <= b);
    // a << gap has the same top bit position as b, so the answer is gap or
    // gap - 1, and the shift cannot overflow.
    let gap = b.ilog2() - a.ilog2();
    if (a << gap) <= b {
        gap
    } else {
        gap - 1
    }
}

/// Route a job by relative laxity given the machine-count estimate m*.
/// Total for every rho in [0, 1); precedence CMS, then EDF, then the unique
/// SJF bucket containing rho.
pub fn route(job: &Job, m_star: u32) -> Route {
    assert!(m_star >= 1);
    let rho = job.relative_laxity();
    let a = *rho.numer() as u128;
    let b = *rho.denom() as u128;
    // rho <= 1/m*  <=>  a * m* <= b
    if rho.is_zero() || a * m_star as u128 <= b {
        return Route::Cms;
    }
    // rho >= 1/4  <=>  4a >= b
    if 4 * a >= b {
        return Route::Edf;
    }
    // Middle band: rho in (1/2^(2^(i+1)), 1/2^(2^i)] picks bucket i.
    // With e = max{e : rho <= 1/2^e}, that is exactly i = floor(log2 e):
    // 2^i <= e < 2^(i+1).
    let e = max_pow2_shift(a, b);
    debug_assert!(e >= 2, "rho < 1/4 here, so e >= 2");
    let i = e.ilog2();
    debug_assert!(
        i >= 1 && i <= bucket_count(m_star),
        "bucket index within range for every rho in (1/m*, 1/4)"
    );
    Route::Sjf(i)
}
