//! Monotone bisection on dyadic brackets.

use super::dyadic::DyadicRational;
use super::interval::DyadicInterval;
use super::NumericsError;

/// Result of a bisection run, including the evaluation count so callers can
/// assert the budget.
#[derive(Debug, Clone)]
pub struct BisectOutcome {
    pub interval: DyadicInterval,
    pub evaluations: usize,
    /// Predicate value on the `lo` side (the `hi` side is the opposite).
    pub lo_value: bool,
}

/// Bisect a monotone predicate until the bracket width is `<= 2^-bits`.
///
/// The endpoints must evaluate to different values. Monotonicity is the
/// caller's responsibility; with-in budget probes cannot observe a violation
/// (every probe refutes at most one endpoint), so use
/// [`bisect_monotone_checked`] when a spot-check is wanted.
pub fn bisect_monotone<E>(
    mut pred: impl FnMut(&DyadicRational) -> Result<bool, E>,
    bracket: &DyadicInterval,
    bits: u64,
) -> Result<BisectOutcome, E>
where
    E: From<NumericsError>,
{
    let mut lo = bracket.lo().clone();
    let mut hi = bracket.hi().clone();
    let p_lo = pred(&lo)?;
    let p_hi = pred(&hi)?;
    let mut evaluations = 2;
    if p_lo == p_hi {
        return Err(NumericsError::NoSignChange.into());
    }
    let target = DyadicRational::pow2(-(bits as i64));
    while hi.sub(&lo) > target {
        let mid = lo.midpoint(&hi);
        let p_mid = pred(&mid)?;
        evaluations += 1;
        if p_mid == p_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(BisectOutcome { interval: DyadicInterval::new(lo, hi), evaluations, lo_value: p_lo })
}

/// Bisection plus `extra_probes` equispaced spot checks over the original
/// bracket: probes left of the located root must agree with the `lo`
/// endpoint, probes right of it with `hi`. A disagreement is reported as
/// [`NumericsError::MonotonicityViolation`].
pub fn bisect_monotone_checked<E>(
    mut pred: impl FnMut(&DyadicRational) -> Result<bool, E>,
    bracket: &DyadicInterval,
    bits: u64,
    extra_probes: usize,
) -> Result<BisectOutcome, E>
where
    E: From<NumericsError>,
{
    let out = bisect_monotone(&mut pred, bracket, bits)?;
    let w = bracket.width();
    // dyadic grid of 2^k - 1 interior probes covering the requested count
    let k = usize::BITS - extra_probes.leading_zeros();
    for i in 1..=extra_probes {
        let frac = DyadicRational::from_parts(i as i64, k as u64);
        let probe = bracket.lo().add(&w.mul(&frac));
        if probe <= *out.interval.lo() {
            if pred(&probe)? != out.lo_value {
                return Err(NumericsError::MonotonicityViolation { probe: i }.into());
            }
        } else if probe >= *out.interval.hi() && pred(&probe)? == out.lo_value {
            return Err(NumericsError::MonotonicityViolation { probe: i }.into());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bracket(a: i64, b: i64) -> DyadicInterval {
        DyadicInterval::new(DyadicRational::from_int(a), DyadicRational::from_int(b))
    }

    #[test]
    fn sqrt2_to_ten_bits() {
        let two = DyadicRational::from_int(2);
        let out = bisect_monotone::<NumericsError>(
            |x| Ok(x.square() >= two),
            &bracket(1, 2),
            10,
        )
        .unwrap();
        let w = out.interval.width();
        assert!(w <= DyadicRational::pow2(-10));
        let sqrt2 = DyadicRational::from_f64(std::f64::consts::SQRT_2).unwrap();
        assert!(out.interval.inflate(&DyadicRational::pow2(-30)).contains(&sqrt2));
        // budget: unit bracket, endpoints + one probe per bit
        assert!(out.evaluations <= 12);
    }

    #[test]
    fn superstable_fixed_point_parameter() {
        // f_a(0.5) = a/4 >= 0.5  <=>  a >= 2
        let half = DyadicRational::from_parts(1, 1);
        let out = bisect_monotone::<NumericsError>(
            |a| Ok(a.mul(&DyadicRational::from_parts(1, 2)) >= half),
            &bracket(1, 3),
            30,
        )
        .unwrap();
        assert!(out.interval.contains(&DyadicRational::from_int(2)));
    }

    #[test]
    fn no_sign_change_detected() {
        let r = bisect_monotone::<NumericsError>(|_| Ok(true), &bracket(0, 1), 4);
        assert!(matches!(r, Err(NumericsError::NoSignChange)));
    }

    #[test]
    fn composed_map_parameter_root() {
        // pred(a) = f_a^2(0.5) >= 0.5 on [3,4]: root at 1 + sqrt(5), the real
        // root of a^3 - 4a^2 + 8 in (3,4). Verified by exact polynomial
        // evaluation at the returned endpoints.
        let half = DyadicRational::from_parts(1, 1);
        let f2 = |a: &DyadicRational| {
            let x1 = a.mul(&DyadicRational::from_parts(1, 2)); // a/4
            a.mul(&x1).mul(&DyadicRational::one().sub(&x1))
        };
        let out = bisect_monotone::<NumericsError>(
            |a| Ok(f2(a) < half), // decreasing in a near the root? orientation handled by bisect
            &bracket(3, 4),
            40,
        )
        .unwrap();
        let poly = |a: &DyadicRational| {
            // a^3 - 4 a^2 + 8, exact
            let a2 = a.square();
            a2.mul(a).sub(&a2.mul(&DyadicRational::from_int(4))).add(&DyadicRational::from_int(8))
        };
        let plo = poly(out.interval.lo());
        let phi = poly(out.interval.hi());
        assert!(plo.is_negative() != phi.is_negative());
        assert!(out.interval.width() <= DyadicRational::pow2(-40));
        let root = DyadicRational::from_f64(1.0 + 5f64.sqrt()).unwrap();
        assert!(out.interval.inflate(&DyadicRational::pow2(-45)).contains(&root));
    }
}
