//! Seeded instance generators for the regimes the schedulers care about.
//!
//! Generation is a pure function of the spec: the same spec (including its
//! seed) always yields the same instance, bit for bit. Laxity-constrained
//! kinds hit their range exactly on integer data by picking each window
//! length first and then drawing the size from the integer subrange the
//! laxity range forces, resampling the window when that subrange is empty.

use crate::job::{Instance, Job};
use crate::time::Rat;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GenKind {
    /// Anything goes within the horizon.
    Uniform,
    /// Relative slack confined to [lo, hi].
    Bucketed { lo: Rat, hi: Rat },
    /// Relative slack at most 1/m.
    VeryTight { m: u32 },
    /// Relative slack at least rho0.
    Loose { rho0: Rat },
    /// Any two windows are nested or disjoint.
    Laminar,
    /// Later releases never have earlier deadlines.
    Agreeable,
    /// Bursts of identical zero-slack jobs in doubling wave sizes, built to
    /// force pool growth.
    AdversarialDoubling,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenSpec {
    pub kind: GenKind,
    pub n: usize,
    pub horizon: i64,
    pub max_size: i64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenError {
    #[error("invalid generator parameters: {0}")]
    BadSpec(&'static str),
    #[error("no window within the horizon admits the slack range (gave up after {0} tries)")]
    Unsatisfiable(u32),
}

const MAX_TRIES: u32 = 10_000;

/// Max size over min size.
pub fn p_ratio(inst: &Instance) -> Option<Rat> {
    let max = inst.jobs().iter().map(|j| j.p).max()?;
    let min = inst.jobs().iter().map(|j| j.p).min()?;
    Some(Rat::new(max as i128, min as i128))
}

pub fn generate(spec: &GenSpec) -> Result<Instance, GenError> {
    if spec.horizon < 1 {
        return Err(GenError::BadSpec("horizon must be at least 1"));
    }
    if spec.max_size < 1 {
        return Err(GenError::BadSpec("max size must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut triples: Vec<(i64, i64, i64)> = match &spec.kind {
        GenKind::Uniform => ranged(&mut rng, spec, Rat::zero(), Rat::one())?,
        GenKind::Bucketed { lo, hi } => {
            if lo.is_negative() || lo > hi || *hi >= Rat::one() {
                return Err(GenError::BadSpec("slack range must satisfy 0 <= lo <= hi < 1"));
            }
            ranged(&mut rng, spec, *lo, *hi)?
        }
        GenKind::VeryTight { m } => {
            if *m < 1 {
                return Err(GenError::BadSpec("machine target must be at least 1"));
            }
            ranged(&mut rng, spec, Rat::zero(), Rat::new(1, *m as i128))?
        }
        GenKind::Loose { rho0 } => {
            if rho0.is_negative() || *rho0 >= Rat::one() {
                return Err(GenError::BadSpec("slack floor must be in [0, 1)"));
            }
            // upper end open: rho < 1 always holds, so only the floor binds
            ranged(&mut rng, spec, *rho0, Rat::one())?
        }
        GenKind::Laminar => laminar(&mut rng, spec),
        GenKind::Agreeable => agreeable(&mut rng, spec),
        GenKind::AdversarialDoubling => adversarial(&mut rng, spec),
    };

    // canonical ids: sort by window, then number 0..n
    triples.sort_by_key(|&(r, d, p)| (r, d, p));
    let jobs: Vec<Job> = triples
        .iter()
        .enumerate()
        .map(|(i, &(r, d, p))| Job::new(i as u32, r, d, p))
        .collect();
    Ok(Instance::new(jobs).expect("generators only emit valid jobs"))
}

/// Jobs whose relative slack lies in [lo, hi] (hi = 1 meaning "< 1", i.e.
/// unconstrained above). Window first, then the size subrange it forces:
/// slack/span <= hi forces p >= span*(1-hi); slack/span >= lo forces
/// p <= span*(1-lo).
fn ranged(
    rng: &mut ChaCha8Rng,
    spec: &GenSpec,
    lo: Rat,
    hi: Rat,
) -> Result<Vec<(i64, i64, i64)>, GenError> {
    let mut out = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let mut placed = false;
        for _ in 0..MAX_TRIES {
            let span = rng.gen_range(1..=spec.horizon);
            let p_min = if hi >= Rat::one() {
                1
            } else {
                ceil_mul(span, Rat::one() - hi).max(1)
            };
            let p_max = floor_mul(span, Rat::one() - lo).min(spec.max_size).min(span);
            if p_min > p_max {
                continue;
            }
            let p = rng.gen_range(p_min..=p_max);
            let r = rng.gen_range(0..=(spec.horizon - span));
            let job = Job::new(0, r, r + span, p);
            let rho = job.relative_laxity();
            debug_assert!(rho >= lo && (hi >= Rat::one() || rho <= hi));
            out.push((r, r + span, p));
            placed = true;
            break;
        }
        if !placed {
            return Err(GenError::Unsatisfiable(MAX_TRIES));
        }
    }
    Ok(out)
}

fn ceil_mul(span: i64, f: Rat) -> i64 {
    let num = span as i128 * f.numer();
    Integer::div_ceil(&num, f.denom()) as i64
}

fn floor_mul(span: i64, f: Rat) -> i64 {
    let num = span as i128 * f.numer();
    Integer::div_floor(&num, f.denom()) as i64
}

/// Nested-or-disjoint windows: recursively split the horizon, emitting one
/// job per segment; when the segment tree is exhausted, reuse existing
/// windows (equal windows are trivially nested).
fn laminar(rng: &mut ChaCha8Rng, spec: &GenSpec) -> Vec<(i64, i64, i64)> {
    let mut out: Vec<(i64, i64, i64)> = Vec::with_capacity(spec.n);
    let mut segments: Vec<(i64, i64)> = vec![(0, spec.horizon)];
    let mut windows: Vec<(i64, i64)> = Vec::new();
    while out.len() < spec.n {
        let (a, b) = match segments.pop() {
            Some(seg) => seg,
            None => windows[rng.gen_range(0..windows.len())],
        };
        let span = b - a;
        let p = rng.gen_range(1..=span.min(spec.max_size));
        out.push((a, b, p));
        windows.push((a, b));
        if span >= 2 {
            let mid = a + rng.gen_range(1..span);
            // children tile the parent: nested in it, disjoint from each other
            segments.push((mid, b));
            segments.push((a, mid));
        }
    }
    out
}

/// Sorted releases with deadlines forced to follow the same order.
fn agreeable(rng: &mut ChaCha8Rng, spec: &GenSpec) -> Vec<(i64, i64, i64)> {
    let mut releases: Vec<i64> = (0..spec.n)
        .map(|_| rng.gen_range(0..spec.horizon))
        .collect();
    releases.sort_unstable();
    let mut out = Vec::with_capacity(spec.n);
    let mut last_d = 0i64;
    for r in releases {
        let span = rng.gen_range(1..=spec.max_size.min(spec.horizon));
        // deadlines may stretch past the horizon to preserve the order
        let d = (r + span).max(last_d);
        last_d = d;
        let p = rng.gen_range(1..=(d - r).min(spec.max_size));
        out.push((r, d, p));
    }
    out
}

/// Waves of identical zero-slack jobs, wave k holding 2^k jobs: each job
/// saturates one machine for its whole window, so admission probes fail en
/// masse and pool-doubling schedulers must grow through their full ladder.
fn adversarial(rng: &mut ChaCha8Rng, spec: &GenSpec) -> Vec<(i64, i64, i64)> {
    let mut out = Vec::with_capacity(spec.n);
    let mut t = 0i64;
    let mut wave = 0u32;
    while out.len() < spec.n {
        let count = (1usize << wave.min(20)).min(spec.n - out.len());
        let p = rng.gen_range((spec.max_size / 2).max(1)..=spec.max_size);
        for _ in 0..count {
            out.push((t, t + p, p));
        }
        t += p + rng.gen_range(1..=spec.max_size);
        wave += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::rat;

    fn spec(kind: GenKind, n: usize, seed: u64) -> GenSpec {
        GenSpec {
            kind,
            n,
            horizon: 64,
            max_size: 16,
            seed,
        }
    }

    #[test]
    fn same_seed_same_instance_different_seed_differs() {
        for kind in [
            GenKind::Uniform,
            GenKind::Bucketed {
                lo: rat(1, 16),
                hi: rat(1, 4),
            },
            GenKind::VeryTight { m: 8 },
            GenKind::Loose { rho0: rat(1, 2) },
            GenKind::Laminar,
            GenKind::Agreeable,
            GenKind::AdversarialDoubling,
        ] {
            let a = generate(&spec(kind.clone(), 40, 7)).unwrap();
            let b = generate(&spec(kind.clone(), 40, 7)).unwrap();
            assert_eq!(a, b, "{kind:?} must be deterministic");
            assert_eq!(a.to_json(), b.to_json());
            let c = generate(&spec(kind.clone(), 40, 8)).unwrap();
            assert_ne!(a, c, "{kind:?} seeds must matter");
        }
    }

    #[test]
    fn instances_have_exactly_n_jobs_with_canonical_ids() {
        for kind in [GenKind::Uniform, GenKind::Laminar, GenKind::Agreeable] {
            let inst = generate(&spec(kind, 25, 3)).unwrap();
            assert_eq!(inst.len(), 25);
            let ids: Vec<u32> = inst.jobs().iter().map(|j| j.id).collect();
            assert_eq!(ids, (0..25).collect::<Vec<_>>());
            // id order follows release order
            let rs: Vec<i64> = inst.jobs().iter().map(|j| j.r).collect();
            assert!(rs.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn bucketed_hits_the_range_exactly() {
        let inst = generate(&spec(
            GenKind::Bucketed {
                lo: rat(1, 16),
                hi: rat(1, 4),
            },
            100,
            11,
        ))
        .unwrap();
        assert_eq!(inst.len(), 100);
        for j in inst.jobs() {
            let rho = j.relative_laxity();
            assert!(
                rho >= rat(1, 16) && rho <= rat(1, 4),
                "job {} has slack share {rho}",
                j.id
            );
        }
    }

    #[test]
    fn very_tight_stays_under_one_over_m() {
        for seed in 0..10u64 {
            let inst = generate(&spec(GenKind::VeryTight { m: 8 }, 50, seed)).unwrap();
            for j in inst.jobs() {
                assert!(j.relative_laxity() <= rat(1, 8));
            }
        }
    }

    #[test]
    fn loose_stays_above_the_floor() {
        for seed in 0..10u64 {
            let inst = generate(&spec(GenKind::Loose { rho0: rat(1, 2) }, 50, seed)).unwrap();
            for j in inst.jobs() {
                assert!(j.relative_laxity() >= rat(1, 2));
            }
        }
    }

    #[test]
    fn laminar_windows_nest_or_avoid_each_other() {
        for seed in 0..10u64 {
            let inst = generate(&spec(GenKind::Laminar, 60, seed)).unwrap();
            let js = inst.jobs();
            for a in js {
                for b in js {
                    let (ia, ib) = (a.lifespan(), b.lifespan());
                    let ok = !ia.overlaps(&ib) || ia.contains(&ib) || ib.contains(&ia);
                    assert!(ok, "windows {ia} and {ib} partially overlap");
                }
            }
        }
    }

    #[test]
    fn agreeable_orders_deadlines_like_releases() {
        for seed in 0..10u64 {
            let inst = generate(&spec(GenKind::Agreeable, 60, seed)).unwrap();
            let js = inst.jobs();
            for w in js.windows(2) {
                assert!(w[0].r <= w[1].r);
                assert!(w[0].d <= w[1].d, "deadline order breaks release order");
            }
        }
    }

    #[test]
    fn adversarial_waves_double_and_have_zero_slack() {
        let inst = generate(&spec(GenKind::AdversarialDoubling, 30, 5)).unwrap();
        assert_eq!(inst.len(), 30);
        for j in inst.jobs() {
            assert_eq!(j.laxity(), 0);
        }
        // group by release: wave sizes 1, 2, 4, ... with the last truncated
        let mut sizes: Vec<usize> = Vec::new();
        let mut last_r = i64::MIN;
        for j in inst.jobs() {
            if j.r != last_r {
                sizes.push(0);
                last_r = j.r;
            }
            *sizes.last_mut().unwrap() += 1;
        }
        assert_eq!(sizes, vec![1, 2, 4, 8, 15]);
    }

    #[test]
    fn p_ratio_examples() {
        let two_sizes = Instance::new(vec![Job::new(0, 0, 10, 2), Job::new(1, 0, 10, 8)]).unwrap();
        assert_eq!(p_ratio(&two_sizes), Some(rat(4, 1)));
        let single = Instance::new(vec![Job::new(0, 0, 10, 3)]).unwrap();
        assert_eq!(p_ratio(&single), Some(rat(1, 1)));
        let three = Instance::new(vec![
            Job::new(0, 0, 20, 3),
            Job::new(1, 0, 20, 5),
            Job::new(2, 0, 20, 15),
        ])
        .unwrap();
        assert_eq!(p_ratio(&three), Some(rat(5, 1)));
        assert_eq!(p_ratio(&Instance::new(vec![]).unwrap()), None);
    }

    #[test]
    fn bad_and_unsatisfiable_specs_error() {
        let bad = GenSpec {
            kind: GenKind::Bucketed {
                lo: rat(1, 2),
                hi: rat(1, 4),
            },
            n: 5,
            horizon: 16,
            max_size: 8,
            seed: 0,
        };
        assert!(matches!(generate(&bad), Err(GenError::BadSpec(_))));
        let too_high = GenSpec {
            kind: GenKind::Bucketed {
                lo: rat(1, 2),
                hi: rat(1, 1),
            },
            n: 5,
            horizon: 16,
            max_size: 8,
            seed: 0,
        };
        assert!(matches!(generate(&too_high), Err(GenError::BadSpec(_))));
        // an exact slack share of 1/7 needs a window divisible by 7, but
        // the horizon caps windows at 4
        let impossible = GenSpec {
            kind: GenKind::Bucketed {
                lo: rat(1, 7),
                hi: rat(1, 7),
            },
            n: 1,
            horizon: 4,
            max_size: 4,
            seed: 0,
        };
        assert_eq!(generate(&impossible), Err(GenError::Unsatisfiable(MAX_TRIES)));
        let zero_h = GenSpec {
            kind: GenKind::Uniform,
            n: 1,
            horizon: 0,
            max_size: 4,
            seed: 0,
        };
        assert!(matches!(generate(&zero_h), Err(GenError::BadSpec(_))));
    }

    #[test]
    fn round_trips_are_bit_exact() {
        for kind in [
            GenKind::Uniform,
            GenKind::VeryTight { m: 4 },
            GenKind::Laminar,
            GenKind::Agreeable,
            GenKind::AdversarialDoubling,
        ] {
            let inst = generate(&spec(kind, 30, 13)).unwrap();
            let s = inst.to_json();
            let back = Instance::from_json(&s).unwrap();
            assert_eq!(back, inst);
            assert_eq!(back.to_json(), s);
        }
    }
}
