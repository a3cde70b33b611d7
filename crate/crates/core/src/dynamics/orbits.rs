//! Periodic orbits of the stage named by symbolic words, their itineraries,
//! and the uniform measures carried by them.

use serde::{Deserialize, Serialize};

use crate::measures::DiscreteMeasure;
use crate::numerics::{iterate_enclosure, DyadicInterval, DyadicRational, LazyParameter};

use super::stage::{escalating_sign, g_box, point_bisect, solve_g_preimage, StageGeometry};
use super::words::{word_by_index, SymbolicWord};
use super::DynamicsError;

/// A solved periodic orbit: the `g`-cycle in the Cantor set and the full
/// `f`-orbit `Per_a(n)` it generates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    /// 1-based index in the word enumeration.
    pub index: u64,
    pub word: SymbolicWord,
    /// One enclosure per rotation; entry `s` has itinerary `rotation(s)`.
    pub g_points: Vec<DyadicInterval>,
    /// De-duplicated `f`-orbit: the union of `f^j` images, `j = 0,1,2`.
    pub f_points: Vec<DyadicInterval>,
}

impl PeriodicOrbit {
    /// `|Per_a(n)|`, the normalizer of the uniform orbit measure.
    pub fn f_period(&self) -> usize {
        self.f_points.len()
    }
}

/// Result of following the symbolic coding for a while.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Itinerary {
    pub letters: Vec<bool>,
    pub outcome: ItineraryOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItineraryOutcome {
    Completed,
    /// Certified outside `L union R` at this step (points of the escape gap
    /// leave `I` within one more iterate, so they are not in the Cantor
    /// set).
    Escaped { step: u64 },
    /// An enclosure straddles a branch boundary: raise precision.
    Undecidable { step: u64 },
}

/// Certified symbolic coding of the `g`-orbit of `x`.
///
/// A letter is emitted when the enclosure certifiably lies in the closed
/// hull of one branch; for points of the Cantor set this determines the
/// symbol. Escape is certified either below `beta'`/above `beta` or inside
/// the open gap `(l, r)`.
pub fn itinerary(
    stage: &StageGeometry,
    x: &DyadicInterval,
    steps: u64,
    work_bits: u64,
) -> Result<Itinerary, DynamicsError> {
    let mut cur = x.clone();
    let mut letters = Vec::with_capacity(steps as usize);
    for step in 0..steps {
        let outside = cur.hi() < stage.beta_prime.lo() || cur.lo() > stage.beta.hi();
        if outside {
            return Ok(Itinerary { letters, outcome: ItineraryOutcome::Escaped { step } });
        }
        let in_gap = cur.lo() > stage.l.hi() && cur.hi() < stage.r.lo();
        if in_gap {
            return Ok(Itinerary { letters, outcome: ItineraryOutcome::Escaped { step } });
        }
        // Letters are decided by the gap boundaries alone: a Cantor-set
        // point left of the gap is in L (below beta' it would not be in
        // C_a at all), and dually on the right.
        if cur.hi() <= stage.l.hi() {
            letters.push(false);
        } else if cur.lo() >= stage.r.lo() {
            letters.push(true);
        } else {
            return Ok(Itinerary { letters, outcome: ItineraryOutcome::Undecidable { step } });
        }
        cur = g_box(&stage.a, &cur, work_bits)?;
    }
    Ok(Itinerary { letters, outcome: ItineraryOutcome::Completed })
}

/// Solve the orbit named by the `n`-th word, to enclosure width
/// `<= 2^-bits`.
pub fn solve_periodic_orbit(
    a: &mut LazyParameter,
    n: u64,
    bits: u64,
) -> Result<PeriodicOrbit, DynamicsError> {
    let stage = super::stage::solve_stage(a, bits + 10)?;
    solve_periodic_orbit_at(&stage, n, bits)
}

/// Same, against an already solved stage (its `bits` must be >= `bits`).
pub fn solve_periodic_orbit_at(
    stage: &StageGeometry,
    n: u64,
    bits: u64,
) -> Result<PeriodicOrbit, DynamicsError> {
    let word = word_by_index(n);
    let k = word.g_period();
    let g_points = if word.letters() == [true] {
        vec![stage.beta.clone()]
    } else {
        let mut pts = Vec::with_capacity(k);
        for s in 0..k {
            pts.push(solve_cycle_point(stage, &word.rotation(s), bits)?);
        }
        pts
    };

    // certify the itinerary of each point
    let wb = 2 * (bits + 10) * (k as u64 + 3) + 64;
    for (s, p) in g_points.iter().enumerate() {
        let it = itinerary(stage, p, k as u64, wb)?;
        if it.outcome != ItineraryOutcome::Completed || it.letters != word.rotation(s) {
            return Err(match it.outcome {
                ItineraryOutcome::Undecidable { step } => DynamicsError::Undecidable { step },
                _ => DynamicsError::WrongItinerary { index: n, rotation: s as u64 },
            });
        }
    }

    // certify the cycle chain: g maps each enclosure into a small
    // neighborhood of the successor
    let slack = DyadicRational::pow2(-(bits as i64));
    for s in 0..g_points.len() {
        let img = g_box(&stage.a, &g_points[s], wb)?;
        let next = g_points[(s + 1) % g_points.len()].inflate(&slack);
        if !next.contains_interval(&img) {
            return Err(DynamicsError::ChainBroken { index: n, rotation: s as u64 });
        }
    }

    // f-orbit: union of f^j images, de-duplicated as a set
    let mut f_points: Vec<DyadicInterval> = Vec::with_capacity(3 * k);
    for p in &g_points {
        let mut cur = p.clone();
        for _ in 0..3 {
            f_points.push(cur.clone());
            cur = iterate_enclosure(&stage.a, &cur, 1, wb)?;
        }
    }
    f_points.sort_by(|x, y| x.lo().cmp(y.lo()));
    for w in f_points.windows(2) {
        if w[0].intersects(&w[1]) {
            // distinct points of one orbit can only collide through
            // insufficient precision
            return Err(DynamicsError::Undecidable { step: 0 });
        }
    }

    Ok(PeriodicOrbit { index: n, word, g_points, f_points })
}

fn solve_cycle_point(
    stage: &StageGeometry,
    rotation: &[bool],
    bits: u64,
) -> Result<DyadicInterval, DynamicsError> {
    let k = rotation.len() as u64;
    let depth = bits + 8;
    // cylinder bracket: pull the last branch hull back through the word
    let mut bracket = branch_hull(stage, rotation[rotation.len() - 1]);
    for &letter in rotation[..rotation.len() - 1].iter().rev() {
        bracket = solve_g_preimage(stage, &bracket, letter, depth + 16)?;
        bracket = bracket.intersect(&branch_hull(stage, letter)).ok_or(DynamicsError::BranchLost)?;
    }

    // root of g^k(x) - x inside the cylinder
    let a_mid = DyadicInterval::point(stage.a.midpoint());
    // 2 bits per map application across 3k steps, plus the solve depth
    let wb0 = 6 * k + 2 * depth + 128;
    let wb_max = wb0 * 8;
    let gap = |a: &DyadicInterval, x: &DyadicRational, wb: u64| {
        let xi = DyadicInterval::point(x.clone());
        Ok(iterate_enclosure(a, &xi, 3 * k, wb)?.sub(&xi))
    };
    // orientation: determine the sign at the cylinder's endpoints
    let lo_sign = escalating_sign(|wb| gap(&a_mid, bracket.lo(), wb), wb0, wb_max)?
        .ok_or(DynamicsError::PrecisionExhausted)?;
    let pt = point_bisect(
        |x, wb| gap(&a_mid, x, wb).map(|v| if lo_sign < 0 { v } else { v.neg() }),
        bracket.lo(),
        bracket.hi(),
        depth,
        wb0,
        wb_max,
    )?;

    // fatten and certify the sign change over the whole parameter interval;
    // the tight fattening keeps the g-image of the enclosure inside the
    // successor's certified neighborhood
    let fat = DyadicRational::pow2(-(bits as i64) - 6);
    let lo = pt.midpoint().sub(&fat);
    let hi = pt.midpoint().add(&fat);
    let s_lo = escalating_sign(|wb| gap(&stage.a, &lo, wb), wb0, wb_max)?;
    let s_hi = escalating_sign(|wb| gap(&stage.a, &hi, wb), wb0, wb_max)?;
    if s_lo.is_none() || s_hi.is_none() || s_lo == s_hi {
        return Err(DynamicsError::PrecisionExhausted);
    }
    Ok(DyadicInterval::new(lo, hi))
}

pub(crate) fn branch_hull(stage: &StageGeometry, letter: bool) -> DyadicInterval {
    if letter {
        DyadicInterval::new(stage.r.lo().clone(), stage.beta.hi().clone())
    } else {
        DyadicInterval::new(stage.beta_prime.lo().clone(), stage.l.hi().clone())
    }
}

/// The uniform probability measure on `Per_a(n)` (atoms at enclosure
/// midpoints, exact weights `1/|Per_a(n)|`).
pub fn lambda_measure(orbit: &PeriodicOrbit) -> Result<DiscreteMeasure, DynamicsError> {
    let points = orbit.f_points.iter().map(|p| p.midpoint()).collect();
    DiscreteMeasure::uniform(points).map_err(|_| DynamicsError::EmptyWord)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::stage::solve_stage;
    use num_rational::BigRational;

    fn stage_39(bits: u64) -> StageGeometry {
        let mut a =
            LazyParameter::from_rational(&BigRational::new(39.into(), 10.into()));
        solve_stage(&mut a, bits).unwrap()
    }

    #[test]
    fn orbit_one_is_beta() {
        let st = stage_39(50);
        let orb = solve_periodic_orbit_at(&st, 1, 40).unwrap();
        assert_eq!(orb.g_points.len(), 1);
        assert_eq!(orb.f_points.len(), 3);
        assert!(orb.g_points[0].intersects(&st.beta));
    }

    #[test]
    fn orbit_two_is_the_left_fixed_point() {
        let st = stage_39(50);
        let orb = solve_periodic_orbit_at(&st, 2, 40).unwrap();
        assert_eq!(orb.word.to_string(), "0");
        assert_eq!(orb.g_points.len(), 1);
        let p = &orb.g_points[0];
        assert!(p.hi() < st.l.lo()); // inside L, strictly left of l
        assert!(p.lo() > st.beta_prime.hi());
        // itinerary constant 0
        let it = itinerary(&st, p, 5, 1024).unwrap();
        assert_eq!(it.outcome, ItineraryOutcome::Completed);
        assert_eq!(it.letters, vec![false; 5]);
    }

    #[test]
    fn orbit_three_swaps_under_g() {
        let st = stage_39(50);
        let orb = solve_periodic_orbit_at(&st, 3, 40).unwrap();
        assert_eq!(orb.word.to_string(), "10");
        assert_eq!(orb.g_points.len(), 2);
        assert_eq!(orb.f_points.len(), 6);
        // composed residual: g^2(x) ~ x within the certified slack
        let wb = 2048;
        let img = g_box(&st.a, &g_box(&st.a, &orb.g_points[0], wb).unwrap(), wb).unwrap();
        let fat = orb.g_points[0].inflate(&DyadicRational::pow2(-34));
        assert!(fat.contains_interval(&img));
    }

    #[test]
    fn beta_prime_maps_to_beta_then_stays() {
        let st = stage_39(50);
        let it = itinerary(&st, &st.beta_prime, 6, 2048).unwrap();
        assert_eq!(it.outcome, ItineraryOutcome::Completed);
        assert_eq!(it.letters[0], false);
        assert_eq!(&it.letters[1..], &[true; 5]);
    }

    #[test]
    fn escape_detected_in_gap() {
        let st = stage_39(50);
        let mid = DyadicInterval::point(DyadicRational::from_parts(1, 1)); // 0.5 in the gap
        let it = itinerary(&st, &mid, 4, 1024).unwrap();
        assert!(matches!(it.outcome, ItineraryOutcome::Escaped { step: 0 }));
    }

    #[test]
    fn lambda_measure_is_uniform() {
        let st = stage_39(50);
        let orb = solve_periodic_orbit_at(&st, 3, 40).unwrap();
        let mu = lambda_measure(&orb).unwrap();
        assert_eq!(mu.len(), 6);
        for atom in mu.atoms() {
            assert_eq!(atom.w, crate::ratio::rat(1, 6));
        }
    }
}
