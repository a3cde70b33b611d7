//! Lazily refined real parameters and the dyadic oracle protocol.
//!
//! A [`LazyParameter`] is a real number known only through a shrinking
//! dyadic interval. Oracle answers are derived from the interval midpoint
//! rounded onto `D_m` and memoized, so a transcript of queries is
//! deterministic and replayable. Retuning (the game's parameter moves)
//! carries the memoized prefix forward and verifies it still satisfies the
//! protocol bound for the new interval.

use std::collections::BTreeMap;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use super::dyadic::{DyadicRational, Rounding};
use super::interval::DyadicInterval;
use super::iterate::iterate_enclosure;
use super::NumericsError;

/// How a parameter refines itself. Kept as data (not closures) so tuned
/// parameters serialize and replay.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Refiner {
    /// An exact rational value; refines to any width.
    ExactRational { num: String, den: String },
    /// No further knowledge than the current interval.
    Fixed,
    /// The parameter with `f_a^period(0.5) = 0.5` inside the current
    /// interval, refined by continued bisection of the sign of
    /// `f_a^period(0.5) - 0.5` (certified via interval evaluation).
    SuperattractingCritical { period: u64, lo_below: bool },
}

/// Certified sign of `f_a^period(0.5) - 1/2` at an exact dyadic `a`.
///
/// Escalates working precision until the enclosure clears 1/2 or becomes
/// exact (a point), so superattracting dyadic parameters like `a = 2`
/// decide as `>= 1/2`.
pub fn critical_orbit_at_least_half(
    a: &DyadicRational,
    period: u64,
    max_work_bits: u64,
) -> Result<bool, NumericsError> {
    let half = DyadicRational::from_parts(1, 1);
    let a_iv = DyadicInterval::point(a.clone());
    let x = DyadicInterval::point(half.clone());
    let mut wb = 2 * period + 64;
    loop {
        let y = iterate_enclosure(&a_iv, &x, period, wb)?;
        if y.lo() > &half {
            return Ok(true);
        }
        if y.hi() < &half {
            return Ok(false);
        }
        if y.is_point() {
            return Ok(y.lo() >= &half);
        }
        if wb >= max_work_bits {
            return Err(NumericsError::RefinementExhausted {
                requested: max_work_bits,
                achieved_log2: 0,
            });
        }
        wb = (wb * 2).min(max_work_bits);
    }
}

/// A real parameter as a refinable dyadic interval plus its oracle view.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LazyParameter {
    current: DyadicInterval,
    refiner: Refiner,
    frozen_bits: u64,
    memo: BTreeMap<u64, DyadicRational>,
}

/// Exported oracle transcript: each answered depth with its answer.
pub type OracleLog = Vec<(u64, DyadicRational)>;

impl LazyParameter {
    pub fn from_interval(current: DyadicInterval) -> Self {
        LazyParameter { current, refiner: Refiner::Fixed, frozen_bits: 0, memo: BTreeMap::new() }
    }

    pub fn from_dyadic(x: DyadicRational) -> Self {
        LazyParameter::from_rational(&x.to_rational())
    }

    pub fn from_rational(r: &BigRational) -> Self {
        let refiner =
            Refiner::ExactRational { num: r.numer().to_string(), den: r.denom().to_string() };
        let current = rational_enclosure(r, 8);
        LazyParameter { current, refiner, frozen_bits: 0, memo: BTreeMap::new() }
    }

    pub fn superattracting(bracket: DyadicInterval, period: u64, lo_below: bool) -> Self {
        LazyParameter {
            current: bracket,
            refiner: Refiner::SuperattractingCritical { period, lo_below },
            frozen_bits: 0,
            memo: BTreeMap::new(),
        }
    }

    /// Rebuild a parameter after a retune: the new interval must keep every
    /// memoized oracle answer up to `frozen_bits` valid; deeper answers are
    /// dropped.
    pub fn retuned(
        new: LazyParameter,
        previous: &LazyParameter,
        frozen_bits: u64,
    ) -> Result<Self, NumericsError> {
        let mut p = new;
        p.frozen_bits = frozen_bits;
        if frozen_bits > 0 && previous.memo.range(..=frozen_bits).next().is_some() {
            // tighten the new interval enough to witness prefix agreement
            p.refine(frozen_bits + 2)?;
        }
        for (&m, phi) in previous.memo.range(..=frozen_bits) {
            if !oracle_bound_holds(phi, m, &p.current) {
                return Err(NumericsError::FrozenPrefixViolated { depth: m });
            }
            p.memo.insert(m, phi.clone());
        }
        Ok(p)
    }

    pub fn current(&self) -> &DyadicInterval {
        &self.current
    }

    pub fn frozen_bits(&self) -> u64 {
        self.frozen_bits
    }

    pub fn oracle_log(&self) -> OracleLog {
        self.memo.iter().map(|(m, v)| (*m, v.clone())).collect()
    }

    /// Narrow the interval to width `<= 2^-m`. Monotone: the new interval is
    /// a subset of the old.
    pub fn refine(&mut self, m: u64) -> Result<(), NumericsError> {
        let target = DyadicRational::pow2(-(m as i64));
        if self.current.width() <= target {
            return Ok(());
        }
        let next = match &self.refiner {
            Refiner::Fixed => {
                return Err(NumericsError::RefinementExhausted {
                    requested: m,
                    achieved_log2: width_log2(&self.current),
                });
            }
            Refiner::ExactRational { num, den } => {
                let r = parse_ratio(num, den)?;
                let enc = rational_enclosure(&r, m + 1);
                enc.intersect(&self.current).ok_or(NumericsError::RefinementExhausted {
                    requested: m,
                    achieved_log2: width_log2(&self.current),
                })?
            }
            Refiner::SuperattractingCritical { period, lo_below } => {
                refine_superattracting(&self.current, *period, *lo_below, m)?
            }
        };
        debug_assert!(self.current.contains_interval(&next));
        // Memoized answers must stay valid; shrinking can only help, but the
        // check is cheap insurance against a broken refiner.
        for (&depth, phi) in &self.memo {
            if !oracle_bound_holds(phi, depth, &next) {
                return Err(NumericsError::FrozenPrefixViolated { depth });
            }
        }
        self.current = next;
        Ok(())
    }

    /// The oracle `phi(m)`: a point of `D_m` within `2^-(m-1)` of the
    /// parameter. Deterministic: repeated queries return the memo.
    pub fn oracle_query(&mut self, m: u64) -> Result<DyadicRational, NumericsError> {
        assert!(m >= 1, "oracle depth must be positive");
        if let Some(v) = self.memo.get(&m) {
            return Ok(v.clone());
        }
        self.refine(m + 1)?;
        let phi = self.current.midpoint().round_to_bits(m, Rounding::Nearest);
        debug_assert!(oracle_bound_holds(&phi, m, &self.current));
        self.memo.insert(m, phi.clone());
        Ok(phi)
    }

    /// Deepest oracle answer handed out so far.
    pub fn deepest_query(&self) -> Option<u64> {
        self.memo.keys().next_back().copied()
    }
}

fn width_log2(iv: &DyadicInterval) -> i64 {
    let w = iv.width();
    if w.is_zero() {
        return i64::MIN;
    }
    w.num_bits() as i64 - w.exponent() as i64
}

/// `|phi - x| < 2^-(m-1)` for every `x` in the interval.
fn oracle_bound_holds(phi: &DyadicRational, m: u64, iv: &DyadicInterval) -> bool {
    let bound = DyadicRational::pow2(-(m as i64) + 1);
    phi.sub(iv.lo()).abs() < bound && iv.hi().sub(phi).abs() < bound
}

fn rational_enclosure(r: &BigRational, m: u64) -> DyadicInterval {
    // floor/ceil of r on the grid D_m via integer division
    let scaled = r * BigRational::from_integer(num_bigint::BigInt::from(1) << m);
    let fl = scaled.floor().to_integer();
    let ce = scaled.ceil().to_integer();
    DyadicInterval::new(DyadicRational::new(fl, m), DyadicRational::new(ce, m))
}

fn parse_ratio(num: &str, den: &str) -> Result<BigRational, NumericsError> {
    let n = num.parse().map_err(|_| NumericsError::BadParameter(num.into()))?;
    let d = den.parse().map_err(|_| NumericsError::BadParameter(den.into()))?;
    Ok(BigRational::new(n, d))
}

fn refine_superattracting(
    bracket: &DyadicInterval,
    period: u64,
    lo_below: bool,
    m: u64,
) -> Result<DyadicInterval, NumericsError> {
    let target = DyadicRational::pow2(-(m as i64));
    let mut lo = bracket.lo().clone();
    let mut hi = bracket.hi().clone();
    let max_wb = 8 * (2 * period + 64) + 8 * m;
    while hi.sub(&lo) > target {
        let mid = lo.midpoint(&hi);
        let at_least = critical_orbit_at_least_half(&mid, period, max_wb)?;
        // lo_below: f^p(0.5) < 0.5 on the lo side
        if at_least == lo_below {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(DyadicInterval::new(lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_traits::Signed;

    #[test]
    fn oracle_for_exact_dyadic() {
        // a = 3.5 = 7/2 lies in D_1; phi(1) must be 7/2 itself.
        let mut p = LazyParameter::from_dyadic(DyadicRational::from_parts(7, 1));
        let phi = p.oracle_query(1).unwrap();
        assert_eq!(phi, DyadicRational::from_parts(7, 1));
    }

    #[test]
    fn oracle_for_one_third() {
        let third = BigRational::new(BigInt::from(1), BigInt::from(3));
        let mut p = LazyParameter::from_rational(&third);
        let phi = p.oracle_query(2).unwrap();
        // protocol: phi in D_2 with |phi - 1/3| < 1/2
        assert!(phi.exponent() <= 2);
        let diff = (phi.to_rational() - &third).abs();
        assert!(diff < BigRational::new(BigInt::from(1), BigInt::from(2)));
        // determinism
        assert_eq!(p.oracle_query(2).unwrap(), phi);
    }

    #[test]
    fn oracle_consistency_across_depths() {
        let r = BigRational::new(BigInt::from(39), BigInt::from(10));
        let mut p = LazyParameter::from_rational(&r);
        let mut answers = Vec::new();
        for m in 1..=24 {
            answers.push((m, p.oracle_query(m).unwrap()));
        }
        for (m, phi_m) in &answers {
            for (mp, phi_mp) in &answers {
                let bound = DyadicRational::pow2(-(*m as i64) + 1)
                    .add(&DyadicRational::pow2(-(*mp as i64) + 1));
                assert!(phi_m.sub(phi_mp).abs() < bound);
            }
        }
    }

    #[test]
    fn superattracting_refiner_finds_a_equals_2() {
        let bracket = DyadicInterval::new(DyadicRational::from_int(1), DyadicRational::from_int(3));
        // f_a(0.5) = a/4: below 0.5 at a=1
        let mut p = LazyParameter::superattracting(bracket, 1, true);
        p.refine(40).unwrap();
        assert!(p.current().contains(&DyadicRational::from_int(2)));
        assert!(p.current().width() <= DyadicRational::pow2(-40));
    }

    #[test]
    fn retune_carries_frozen_prefix() {
        let r = BigRational::new(BigInt::from(39), BigInt::from(10));
        let mut p = LazyParameter::from_rational(&r);
        for m in 1..=12 {
            p.oracle_query(m).unwrap();
        }
        // move the parameter by far less than 2^-36
        let moved = BigRational::new(BigInt::from(39), BigInt::from(10))
            + BigRational::new(BigInt::from(1), BigInt::from(1) << 60);
        let fresh = LazyParameter::from_rational(&moved);
        let mut q = LazyParameter::retuned(fresh, &p, 12).unwrap();
        for m in 1..=12 {
            assert_eq!(q.oracle_query(m).unwrap(), p.oracle_query(m).unwrap());
        }
    }

    #[test]
    fn retune_rejects_large_move() {
        let mut p = LazyParameter::from_rational(&BigRational::new(BigInt::from(3), BigInt::from(1)));
        for m in 1..=8 {
            p.oracle_query(m).unwrap();
        }
        let far = LazyParameter::from_rational(&BigRational::new(BigInt::from(7), BigInt::from(2)));
        let res = LazyParameter::retuned(far, &p, 8);
        assert!(matches!(res, Err(NumericsError::FrozenPrefixViolated { .. })));
    }
}
