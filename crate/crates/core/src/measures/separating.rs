//! Test functions that isolate one periodic orbit from a range of others.

use num_rational::BigRational;
use num_traits::One;

use crate::dynamics::{solve_periodic_orbit_at, solve_stage, StageGeometry};
use crate::numerics::{DyadicInterval, DyadicRational, LazyParameter};
use super::testfn::TestFunction;
use super::MeasuresError;

/// A separating function plus the data needed to audit it: per-point
/// plateau and support radii (shared), and the solved orbit enclosures.
#[derive(Debug, Clone)]
pub struct SeparatingTau {
    pub tau: TestFunction,
    pub target_n: u64,
    /// Plateau half-width around each target point: the mass radius.
    pub radius_in: DyadicRational,
    /// Support half-width; ramps live between the two.
    pub radius_out: DyadicRational,
    pub target_points: Vec<DyadicInterval>,
}

/// Build a sum of height-1 trapezoid bumps around every point of
/// `Per(target_n)` whose supports certifiably avoid `Per(j)` for all `j`
/// in `(avoid_lo, avoid_hi)`, `j != target_n`.
pub fn separating_tau(
    a: &mut LazyParameter,
    target_n: u64,
    avoid_range: (u64, u64),
    bits: u64,
) -> Result<SeparatingTau, MeasuresError> {
    let stage = solve_stage(a, bits + 10)?;
    separating_tau_avoiding(&stage, target_n, avoid_range, bits, &[])
}

/// Same, but additionally keeps the open ramp annuli free of the given
/// atom positions (so integrals against a known measure see only plateau
/// values). Used by the game to make its bookkeeping exact.
pub fn separating_tau_avoiding(
    stage: &StageGeometry,
    target_n: u64,
    avoid_range: (u64, u64),
    bits: u64,
    keep_out_of_ramps: &[DyadicRational],
) -> Result<SeparatingTau, MeasuresError> {
    let target = solve_periodic_orbit_at(stage, target_n, bits)?;
    let mut avoided: Vec<DyadicInterval> = Vec::new();
    for j in (avoid_range.0 + 1)..avoid_range.1 {
        if j == target_n {
            continue;
        }
        let orb = solve_periodic_orbit_at(stage, j, bits)?;
        avoided.extend(orb.f_points.iter().cloned());
    }

    // largest admissible support radius: half the gap to the nearest
    // avoided enclosure (and between distinct target points)
    let mut r_max: DyadicRational = DyadicRational::from_parts(1, 6); // 1/64 cap
    for p in &target.f_points {
        for q in &avoided {
            if p.intersects(q) {
                return Err(MeasuresError::SeparationImpossible {
                    target: target_n,
                    clash: 0,
                });
            }
            let gap = if q.lo() > p.hi() {
                q.lo().sub(p.hi())
            } else {
                p.lo().sub(q.hi())
            };
            let cand = gap.halve();
            if cand < r_max {
                r_max = cand;
            }
        }
    }
    for (i, p) in target.f_points.iter().enumerate() {
        for q in target.f_points.iter().skip(i + 1) {
            let gap = if q.lo() > p.hi() { q.lo().sub(p.hi()) } else { p.lo().sub(q.hi()) };
            let cand = gap.halve();
            if cand < r_max {
                r_max = cand;
            }
        }
    }
    let enc_width = target
        .f_points
        .iter()
        .map(|p| p.width())
        .fold(DyadicRational::zero(), |acc, w| acc.max(w));
    if r_max <= enc_width.mul_pow2(2) {
        return Err(MeasuresError::SeparationImpossible { target: target_n, clash: 0 });
    }

    // plateau at half the support; then nudge both radii so no kept-out
    // atom lies in any open ramp annulus
    let mut radius_out = r_max;
    let mut radius_in = radius_out.halve();
    for _ in 0..64 {
        let mut clean = true;
        'outer: for p in &target.f_points {
            for x in keep_out_of_ramps {
                // distance from the enclosure; inside counts as 0
                let d = p.lo().sub(x).max(x.sub(p.hi())).max(DyadicRational::zero());
                if d > radius_in && d < radius_out {
                    clean = false;
                    break 'outer;
                }
            }
        }
        if clean {
            break;
        }
        // shrink the annulus toward the plateau
        radius_out = radius_in.add(&radius_out).halve();
        let gap = radius_out.sub(&radius_in);
        radius_in = radius_out.sub(&gap.halve());
        if radius_out.sub(&radius_in) < DyadicRational::pow2(-(bits as i64) - 8) {
            return Err(MeasuresError::SeparationImpossible { target: target_n, clash: 0 });
        }
    }

    // bumps: plateau must cover the enclosure
    let mut bumps = Vec::with_capacity(target.f_points.len());
    for p in &target.f_points {
        let x0 = p.lo().sub(&radius_out).to_rational();
        let x1 = p.lo().sub(&radius_in).to_rational();
        let x2 = p.hi().add(&radius_in).to_rational();
        let x3 = p.hi().add(&radius_out).to_rational();
        bumps.push(TestFunction::trapezoid(x0, x1, x2, x3)?);
    }
    let tau = TestFunction::bump_sum(&bumps)?;

    // integral against the uniform orbit measure must be exactly 1
    let lam = crate::dynamics::lambda_measure(&target)?;
    if tau.integrate(&lam) != BigRational::one() {
        return Err(MeasuresError::SeparationImpossible { target: target_n, clash: 0 });
    }

    Ok(SeparatingTau {
        tau,
        target_n,
        radius_in,
        radius_out,
        target_points: target.f_points.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    #[test]
    fn base_case_isolates_orbit_one() {
        let mut a =
            LazyParameter::from_rational(&BigRational::new(39.into(), 10.into()));
        let sep = separating_tau(&mut a, 1, (1, 10), 30).unwrap();
        // three bumps around Per(1)
        assert_eq!(sep.target_points.len(), 3);
        // integral against every avoided orbit's measure is exactly 0
        let stage = solve_stage(&mut a, 40).unwrap();
        for j in 2..10 {
            let orb = solve_periodic_orbit_at(&stage, j, 30).unwrap();
            let lam = crate::dynamics::lambda_measure(&orb).unwrap();
            assert_eq!(sep.tau.integrate(&lam), BigRational::from_integer(0.into()), "orbit {j}");
        }
    }

    #[test]
    fn radii_shrink_as_avoidance_widens() {
        let mut a =
            LazyParameter::from_rational(&BigRational::new(39.into(), 10.into()));
        let narrow = separating_tau(&mut a, 1, (1, 10), 30).unwrap();
        let wide = separating_tau(&mut a, 1, (1, 20), 30).unwrap();
        assert!(wide.radius_out <= narrow.radius_out);
    }
}
