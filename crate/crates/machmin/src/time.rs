//! Exact rational time.
//!
//! Every quantity the schedulers and the oracle reason about (instants,
//! durations, budgets, work) is an exact rational. Floating point appears
//! nowhere in scheduling logic; the only approximate numbers in the whole
//! library are the reporting-only bound values in `certify`.

use num_rational::Ratio;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

/// Dimensionless exact rational (relative laxities, speeds, alpha, beta).
/// `Ratio` keeps the canonical reduced form with a positive denominator.
pub type Rat = Ratio<i128>;

/// Build a `Rat` from integer numerator and denominator.
pub fn rat(num: i64, den: i64) -> Rat {
    Ratio::new(num as i128, den as i128)
}

/// An exact rational instant or duration on the simulated timeline.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct TimePoint(Rat);

impl TimePoint {
    pub const ZERO: TimePoint = TimePoint(Ratio::new_raw(0, 1));

    pub fn new(num: i64, den: i64) -> TimePoint {
        TimePoint(Ratio::new(num as i128, den as i128))
    }

    pub fn from_int(v: i64) -> TimePoint {
        TimePoint(Ratio::from_integer(v as i128))
    }

    pub fn as_rat(self) -> Rat {
        self.0
    }

    pub fn numer(self) -> i128 {
        *self.0.numer()
    }

    pub fn denom(self) -> i128 {
        *self.0.denom()
    }

    pub fn is_zero(self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(self) -> bool {
        self.0.is_negative()
    }

    pub fn min(self, other: TimePoint) -> TimePoint {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: TimePoint) -> TimePoint {
        if self >= other {
            self
        } else {
            other
        }
    }

    /// Scale a duration by a dimensionless factor.
    pub fn scale(self, by: Rat) -> TimePoint {
        TimePoint(self.0 * by)
    }

    /// Divide a duration by a dimensionless factor (e.g. work / speed).
    pub fn div_rat(self, by: Rat) -> TimePoint {
        TimePoint(self.0 / by)
    }

    pub fn to_f64(self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }
}

impl From<Rat> for TimePoint {
    fn from(r: Rat) -> Self {
        TimePoint(r)
    }
}

impl Add for TimePoint {
    type Output = TimePoint;
    fn add(self, rhs: TimePoint) -> TimePoint {
        TimePoint(self.0 + rhs.0)
    }
}

impl Sub for TimePoint {
    type Output = TimePoint;
    fn sub(self, rhs: TimePoint) -> TimePoint {
        TimePoint(self.0 - rhs.0)
    }
}

impl AddAssign for TimePoint {
    fn add_assign(&mut self, rhs: TimePoint) {
        self.0 += rhs.0;
    }
}

impl SubAssign for TimePoint {
    fn sub_assign(&mut self, rhs: TimePoint) {
        self.0 -= rhs.0;
    }
}

impl Neg for TimePoint {
    type Output = TimePoint;
    fn neg(self) -> TimePoint {
        TimePoint(-self.0)
    }
}

impl Mul<Rat> for TimePoint {
    type Output = TimePoint;
    fn mul(self, rhs: Rat) -> TimePoint {
        TimePoint(self.0 * rhs)
    }
}

impl Div<Rat> for TimePoint {
    type Output = TimePoint;
    fn div(self, rhs: Rat) -> TimePoint {
        TimePoint(self.0 / rhs)
    }
}

impl fmt::Display for TimePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_rat(self.0))
    }
}

impl fmt::Debug for TimePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

/// Canonical text form: "p" when the denominator is 1, else "p/q" reduced.
pub fn format_rat(r: Rat) -> String {
    if *r.denom() == 1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ParseRatError {
    #[error("empty rational literal")]
    Empty,
    #[error("invalid integer part in rational literal: {0}")]
    BadInt(String),
    #[error("zero denominator in rational literal")]
    ZeroDenom,
}

/// Parse "p" or "p/q" into an exact rational.
pub fn parse_rat(s: &str) -> Result<Rat, ParseRatError> {
    let s = s.trim();
    if s.is_empty() {
        return Err(ParseRatError::Empty);
    }
    let (num, den) = match s.split_once('/') {
        None => (s, "1"),
        Some((n, d)) => (n, d),
    };
    let n: i128 = num
        .trim()
        .parse()
        .map_err(|_| ParseRatError::BadInt(num.to_string()))?;
    let d: i128 = den
        .trim()
        .parse()
        .map_err(|_| ParseRatError::BadInt(den.to_string()))?;
    if d == 0 {
        return Err(ParseRatError::ZeroDenom);
    }
    Ok(Ratio::new(n, d))
}

impl FromStr for TimePoint {
    type Err = ParseRatError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_rat(s).map(TimePoint)
    }
}

impl Serialize for TimePoint {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&format_rat(self.0))
    }
}

impl<'de> Deserialize<'de> for TimePoint {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let r = rat_serde::deserialize(de)?;
        Ok(TimePoint(r))
    }
}

/// Serde adapter for bare `Rat` fields: canonical "p/q" strings out,
/// strings or JSON integers in.
pub mod rat_serde {
    use super::*;
    use serde::de::Error;

    pub fn serialize<S: Serializer>(r: &Rat, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&format_rat(*r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Rat, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Lit {
            Int(i64),
            Str(String),
        }
        match Lit::deserialize(de)? {
            Lit::Int(v) => Ok(Rat::from_integer(v as i128)),
            Lit::Str(s) => parse_rat(&s).map_err(D::Error::custom),
        }
    }
}

/// Half-open interval [start, end) on the timeline. All containment,
/// overlap and coverage semantics in the library are half-open.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Interval {
    pub start: TimePoint,
    pub end: TimePoint,
}

impl Interval {
    /// Requires start < end: intervals are nonempty by construction.
    pub fn new(start: TimePoint, end: TimePoint) -> Interval {
        assert!(start < end, "interval must have positive length");
        Interval { start, end }
    }

    pub fn from_ints(start: i64, end: i64) -> Interval {
        Interval::new(TimePoint::from_int(start), TimePoint::from_int(end))
    }

    pub fn length(&self) -> TimePoint {
        self.end - self.start
    }

    pub fn contains_point(&self, t: TimePoint) -> bool {
        self.start <= t && t < self.end
    }

    /// Does this interval fully contain `other` ([a,b) ⊆ [c,d))?
    pub fn contains(&self, other: &Interval) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    /// Overlap of two half-open intervals, if it has positive length.
    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let s = self.start.max(other.start);
        let e = self.end.min(other.end);
        if s < e {
            Some(Interval { start: s, end: e })
        } else {
            None
        }
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.start < other.end && other.start < self.end
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

/// Total length of a set of pairwise disjoint sorted intervals.
pub fn total_length(intervals: &[Interval]) -> TimePoint {
    let mut sum = TimePoint::ZERO;
    for iv in intervals {
        sum += iv.length();
    }
    sum
}

/// Normalize an arbitrary collection of intervals into the canonical
/// sorted, pairwise-disjoint form (touching intervals are merged).
pub fn normalize(intervals: &[Interval]) -> Vec<Interval> {
    let mut ivs: Vec<Interval> = intervals.to_vec();
    ivs.sort();
    let mut out: Vec<Interval> = Vec::with_capacity(ivs.len());
    for iv in ivs {
        match out.last_mut() {
            Some(last) if iv.start <= last.end => {
                if iv.end > last.end {
                    last.end = iv.end;
                }
            }
            _ => out.push(iv),
        }
    }
    out
}

/// Set difference `a ∖ b` of two normalized interval sets.
pub fn subtract(a: &[Interval], b: &[Interval]) -> Vec<Interval> {
    let mut out = Vec::new();
    for iv in a {
        let mut cur = iv.start;
        for cut in b {
            if cut.end <= cur {
                continue;
            }
            if cut.start >= iv.end {
                break;
            }
            if cut.start > cur {
                out.push(Interval::new(cur, cut.start.min(iv.end)));
            }
            cur = cur.max(cut.end);
            if cur >= iv.end {
                break;
            }
        }
        if cur < iv.end {
            out.push(Interval::new(cur, iv.end));
        }
    }
    out
}

/// Intersection of a normalized interval set with one interval.
pub fn clip(set: &[Interval], window: &Interval) -> Vec<Interval> {
    set.iter().filter_map(|iv| iv.intersect(window)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tp(n: i64, d: i64) -> TimePoint {
        TimePoint::new(n, d)
    }

    #[test]
    fn canonical_reduced_form() {
        let t = tp(4, 6);
        assert_eq!(t.numer(), 2);
        assert_eq!(t.denom(), 3);
        assert_eq!(tp(-4, -6), tp(2, 3));
        assert_eq!(tp(3, -6).numer(), -1);
        assert_eq!(tp(3, -6).denom(), 2);
    }

    #[test]
    fn display_and_parse_round_trip() {
        for t in [tp(0, 1), tp(5, 1), tp(-7, 3), tp(2, 3), tp(10, 4)] {
            let s = t.to_string();
            assert_eq!(s.parse::<TimePoint>().unwrap(), t);
        }
        assert_eq!(tp(5, 1).to_string(), "5");
        assert_eq!(tp(5, 3).to_string(), "5/3");
        assert_eq!("7".parse::<TimePoint>().unwrap(), tp(7, 1));
        assert!("1/0".parse::<TimePoint>().is_err());
        assert!("".parse::<TimePoint>().is_err());
    }

    #[test]
    fn interval_semantics_half_open() {
        let iv = Interval::from_ints(2, 5);
        assert!(iv.contains_point(tp(2, 1)));
        assert!(iv.contains_point(tp(9, 2)));
        assert!(!iv.contains_point(tp(5, 1)));
        assert!(!iv.overlaps(&Interval::from_ints(5, 7)));
        assert!(iv.overlaps(&Interval::from_ints(4, 7)));
        assert_eq!(iv.intersect(&Interval::from_ints(5, 7)), None);
    }

    #[test]
    fn interval_set_algebra() {
        let a = [Interval::from_ints(0, 10)];
        let b = [Interval::from_ints(2, 3), Interval::from_ints(5, 7)];
        let diff = subtract(&a, &b);
        assert_eq!(
            diff,
            vec![
                Interval::from_ints(0, 2),
                Interval::from_ints(3, 5),
                Interval::from_ints(7, 10)
            ]
        );
        assert_eq!(total_length(&diff), tp(7, 1));
        let merged = normalize(&[
            Interval::from_ints(3, 5),
            Interval::from_ints(0, 3),
            Interval::from_ints(8, 9),
        ]);
        assert_eq!(
            merged,
            vec![Interval::from_ints(0, 5), Interval::from_ints(8, 9)]
        );
    }

    proptest! {
        // Exactness: (a + b) - b == a with no drift, unlike floating point.
        #[test]
        fn add_sub_exact(an in -1000i64..1000, ad in 1i64..60, bn in -1000i64..1000, bd in 1i64..60) {
            let a = tp(an, ad);
            let b = tp(bn, bd);
            prop_assert_eq!((a + b) - b, a);
            prop_assert_eq!((a - b) + b, a);
        }

        #[test]
        fn scale_div_inverse(n in -1000i64..1000, d in 1i64..60, sn in 1i64..50, sd in 1i64..50) {
            let t = tp(n, d);
            let s = rat(sn, sd);
            prop_assert_eq!(t.scale(s).div_rat(s), t);
        }

        #[test]
        fn subtract_length_additive(cut_a in 0i64..20, len_a in 1i64..5, cut_b in 0i64..20, len_b in 1i64..5) {
            let base = [Interval::from_ints(0, 30)];
            let cuts = normalize(&[
                Interval::from_ints(cut_a, cut_a + len_a),
                Interval::from_ints(cut_b, cut_b + len_b),
            ]);
            let diff = subtract(&base, &cuts);
            let total = total_length(&diff) + total_length(&cuts);
            prop_assert_eq!(total, tp(30, 1));
        }
    }
}
