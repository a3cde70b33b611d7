//! Certified iteration of the logistic map on boxes.

use super::dyadic::DyadicRational;
use super::interval::DyadicInterval;
use super::NumericsError;

/// Default working precision for `n` certified iterates. The derivative
/// bound `|f'| <= 4` loses at most 2 bits per step.
pub fn work_bits_for(n: u64) -> u64 {
    2 * n + 64
}

fn unit_interval() -> DyadicInterval {
    DyadicInterval::new(DyadicRational::zero(), DyadicRational::one())
}

fn step(
    a: &DyadicInterval,
    x: &DyadicInterval,
    work_bits: u64,
    k: u64,
) -> Result<DyadicInterval, NumericsError> {
    let y = DyadicInterval::logistic_step(a, x).round_out(work_bits);
    // On [0,1] the image width can never pass 1; hitting 1 means the
    // enclosure carries no information left.
    if y.width() >= DyadicRational::one() {
        return Err(NumericsError::EnclosureBlowup { step: k });
    }
    // The true orbit stays in [0,1] for a in [0,4], x in [0,1]; clipping the
    // enclosure there is sound and keeps rounding noise from accumulating
    // outside the domain.
    y.intersect(&unit_interval()).ok_or(NumericsError::DomainEscape { step: k })
}

/// Certified enclosure of `f_a^n(x)` for every `a' in a`, `x' in x`.
pub fn iterate_enclosure(
    a: &DyadicInterval,
    x: &DyadicInterval,
    n: u64,
    work_bits: u64,
) -> Result<DyadicInterval, NumericsError> {
    let mut cur = x.clone();
    for k in 0..n {
        cur = step(a, &cur, work_bits, k + 1)?;
    }
    Ok(cur)
}

/// All enclosures `x, f(x), ..., f^n(x)` (length `n + 1`).
pub fn iterate_trajectory(
    a: &DyadicInterval,
    x: &DyadicInterval,
    n: u64,
    work_bits: u64,
) -> Result<Vec<DyadicInterval>, NumericsError> {
    let mut out = Vec::with_capacity(n as usize + 1);
    out.push(x.clone());
    let mut cur = x.clone();
    for k in 0..n {
        cur = step(a, &cur, work_bits, k + 1)?;
        out.push(cur.clone());
    }
    Ok(out)
}

/// Interval product of `a (1 - 2 x_k)` along a trajectory: the derivative of
/// the composed map by the chain rule.
pub fn orbit_derivative(a: &DyadicInterval, trajectory: &[DyadicInterval], work_bits: u64) -> DyadicInterval {
    let mut prod = DyadicInterval::point(DyadicRational::one());
    for x in trajectory {
        prod = prod.mul(&DyadicInterval::logistic_derivative(a, x)).round_out(work_bits);
    }
    prod
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(k: i64, m: u64) -> DyadicInterval {
        DyadicInterval::point(DyadicRational::from_parts(k, m))
    }

    #[test]
    fn fixed_point_stays_tight() {
        // a = 2, x = 0.5 is a fixed point; after 100 steps the enclosure must
        // still be within a few ulps of 0.5.
        let a = pt(2, 0);
        let x = pt(1, 1);
        let wb = work_bits_for(100);
        let y = iterate_enclosure(&a, &x, 100, wb).unwrap();
        assert!(y.contains(&DyadicRational::from_parts(1, 1)));
        assert!(y.width() <= DyadicRational::pow2(-(wb as i64) + 2));
    }

    #[test]
    fn full_map_collapses_critical_orbit() {
        // a = 4: 0.5 -> 1 -> 0
        let y = iterate_enclosure(&pt(4, 0), &pt(1, 1), 2, 128).unwrap();
        assert!(y.contains(&DyadicRational::zero()));
        assert!(y.hi() <= &DyadicRational::pow2(-120));
    }

    #[test]
    fn exact_rational_point_is_enclosed() {
        // a = 3.5, x = 0.5: 0.5 -> 7/8 -> 49/128 -> 27097/32768
        let y = iterate_enclosure(&pt(7, 1), &pt(1, 1), 3, 128).unwrap();
        assert!(y.contains(&DyadicRational::from_parts(27097, 15)));
        assert!(y.width() < DyadicRational::pow2(-100));
    }

    #[test]
    fn blowup_reported_at_low_precision() {
        // chaotic parameter, tiny precision: the enclosure must blow up
        let a = pt(4, 0);
        let x = DyadicInterval::new(
            DyadicRational::from_parts(819, 11),
            DyadicRational::from_parts(820, 11),
        );
        let err = iterate_enclosure(&a, &x, 500, 8).unwrap_err();
        assert!(matches!(err, NumericsError::EnclosureBlowup { .. }));
    }
}
