//! Attracting and superattracting cycles, and certification that their
//! uniform measures attract typical orbits (the physical-measure picture).

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measures::{birkhoff_measure, DiscreteMeasure, MeasuresError};
use crate::numerics::{
    bisect_monotone, iterate_enclosure, iterate_trajectory, orbit_derivative, DyadicInterval,
    DyadicRational, NumericsError,
};
use crate::ratio;
use crate::rng;

#[derive(Debug, Error)]
pub enum SinkError {
    #[error("no attracting cycle found within the iteration budget")]
    NoCycleFound,
    #[error("multiplier enclosure straddles 1; raise bits")]
    MultiplierInconclusive,
    #[error("cycle flew apart during polishing; raise bits")]
    PolishFailed,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Measures(#[from] MeasuresError),
}

/// Evidence that one W1 distance decreases along a growing-iterate
/// schedule for one sampled starting point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasinSample {
    pub x: DyadicRational,
    pub checkpoints: Vec<BasinCheckpoint>,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasinCheckpoint {
    pub n: u64,
    #[serde(with = "ratio::pq_string")]
    pub w1_to_sink: BigRational,
}

/// A certified attracting cycle with its uniform measure and sampled basin
/// evidence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SinkCertificate {
    pub a: DyadicInterval,
    pub orbit: Vec<DyadicInterval>,
    pub multiplier: DyadicInterval,
    pub sink_measure: DiscreteMeasure,
    pub basin_evidence: Vec<BasinSample>,
}

impl SinkCertificate {
    pub fn period(&self) -> usize {
        self.orbit.len()
    }
}

/// Locate the parameter with `f_a^period(0.5) = 0.5` inside the window by
/// bisection; the predicate must change sign across the window.
pub fn find_superattracting(
    window: &DyadicInterval,
    period_total: u64,
    bits: u64,
) -> Result<DyadicInterval, SinkError> {
    let max_wb = 16 * (2 * period_total + 64) + 8 * bits;
    let pred = |a: &DyadicRational| -> Result<bool, SinkError> {
        crate::numerics::critical_orbit_at_least_half(a, period_total, max_wb).map_err(SinkError::from)
    };
    let out = bisect_monotone(pred, window, bits)?;
    Ok(out.interval)
}

/// Detect, polish, and certify the attracting cycle reachable from
/// `seed_point`, then sample basin evidence.
#[allow(clippy::too_many_arguments)]
pub fn certify_sink(
    a: &DyadicInterval,
    seed_point: &DyadicRational,
    max_period: u64,
    samples: u64,
    bits: u64,
    basin_iterates: u64,
    seed: u64,
    work_bits: u64,
) -> Result<SinkCertificate, SinkError> {
    // --- closest-return detection ---
    let burn_in = 512u64;
    let tol = DyadicRational::pow2(-(bits as i64) / 2);
    let x0 = DyadicInterval::point(seed_point.clone());
    let traj = iterate_trajectory(a, &x0, burn_in + 2 * max_period, work_bits)?;
    let base = &traj[burn_in as usize];
    let mut period = None;
    for p in 1..=max_period {
        let cand = &traj[(burn_in + p) as usize];
        if cand.midpoint().sub(&base.midpoint()).abs() < tol {
            period = Some(p);
            break;
        }
    }
    let period = period.ok_or(SinkError::NoCycleFound)?;

    // --- polish each cycle point: certified root of f^p(x) - x ---
    let mut orbit = Vec::with_capacity(period as usize);
    for j in 0..period {
        let approx = traj[(burn_in + j) as usize].midpoint();
        orbit.push(polish_cycle_point(a, &approx, period, bits, work_bits)?);
    }

    // --- multiplier: interval chain-rule product along the cycle ---
    let mut mult = DyadicInterval::point(DyadicRational::one());
    for p in &orbit {
        mult = mult.mul(&DyadicInterval::logistic_derivative(a, p)).round_out(work_bits);
    }
    if mult.abs_upper() >= DyadicRational::one() {
        // cross-check against the composed-map derivative before giving up
        let traj_p = iterate_trajectory(a, &orbit[0], period - 1, work_bits)?;
        let alt = orbit_derivative(a, &traj_p, work_bits);
        if alt.abs_upper() >= DyadicRational::one() {
            return Err(SinkError::MultiplierInconclusive);
        }
        mult = alt;
    }

    let sink_measure = DiscreteMeasure::uniform(orbit.iter().map(|p| p.midpoint()).collect())?;

    // --- basin evidence: seeded uniform samples, geometric schedule ---
    let mut schedule = Vec::new();
    let mut n = (basin_iterates / 64).max(64);
    while n < basin_iterates {
        schedule.push(n);
        n *= 4;
    }
    schedule.push(basin_iterates);
    let floor = ratio::rat(1, 256);
    let mut basin_evidence = Vec::with_capacity(samples as usize);
    let mut stream = rng::substream(seed, "basin");
    for _ in 0..samples {
        let x = crate::measures::dyadic_from_fixed(rng::unit_u64(&mut stream));
        let xi = DyadicInterval::point(x.clone());
        let mut checkpoints = Vec::with_capacity(schedule.len());
        let mut ok = true;
        for &n in &schedule {
            match birkhoff_measure(a, &xi, n, work_bits) {
                Ok((mu, _)) => {
                    checkpoints.push(BasinCheckpoint { n, w1_to_sink: mu.w1(&sink_measure) })
                }
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        // decreasing along the schedule, with a floor once converged
        let mut decreasing = ok;
        for w in checkpoints.windows(2) {
            if w[1].w1_to_sink > w[0].w1_to_sink && w[1].w1_to_sink >= floor {
                decreasing = false;
            }
        }
        basin_evidence.push(BasinSample { x, checkpoints, converged: ok && decreasing });
    }

    Ok(SinkCertificate { a: a.clone(), orbit, multiplier: mult, sink_measure, basin_evidence })
}

fn polish_cycle_point(
    a: &DyadicInterval,
    approx: &DyadicRational,
    period: u64,
    bits: u64,
    work_bits: u64,
) -> Result<DyadicInterval, SinkError> {
    // |(f^p)' | < 1 near an attracting cycle, so f^p(x) - x is decreasing
    // through the root: + on the left, - on the right.
    let gap = |x: &DyadicRational| -> Result<DyadicInterval, NumericsError> {
        let xi = DyadicInterval::point(x.clone());
        Ok(iterate_enclosure(a, &xi, period, work_bits)?.sub(&xi))
    };
    let mut rad = DyadicRational::pow2(-(bits as i64) - 2);
    for _ in 0..(bits / 2 + 24) {
        let lo = approx.sub(&rad);
        let hi = approx.add(&rad);
        let s_lo = gap(&lo)?.sign();
        let s_hi = gap(&hi)?.sign();
        if s_lo == Some(1) && s_hi == Some(-1) {
            let fat = DyadicInterval::new(lo, hi);
            if fat.width() <= DyadicRational::pow2(-(bits as i64)) {
                return Ok(fat);
            }
            // bisect down to the requested width, keeping certification
            let pred = |x: &DyadicRational| -> Result<bool, SinkError> {
                match gap(x)?.sign() {
                    Some(s) => Ok(s <= 0),
                    None => Ok(x >= approx), // undecided only at the root itself
                }
            };
            let out = bisect_monotone(pred, &fat, bits + 2)?;
            let lo2 = out.interval.lo().sub(&DyadicRational::pow2(-(bits as i64) - 2));
            let hi2 = out.interval.hi().add(&DyadicRational::pow2(-(bits as i64) - 2));
            if gap(&lo2)?.sign() == Some(1) && gap(&hi2)?.sign() == Some(-1) {
                return Ok(DyadicInterval::new(lo2, hi2));
            }
            return Err(SinkError::PolishFailed);
        }
        rad = rad.mul_pow2(1);
        if rad > DyadicRational::pow2(-2) {
            break;
        }
    }
    Err(SinkError::PolishFailed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(x: f64) -> DyadicInterval {
        DyadicInterval::point(DyadicRational::from_f64(x).unwrap())
    }

    #[test]
    fn superattracting_period_one_is_exact() {
        let w = DyadicInterval::new(DyadicRational::from_int(1), DyadicRational::from_int(3));
        let out = find_superattracting(&w, 1, 40).unwrap();
        assert!(out.contains(&DyadicRational::from_int(2)));
    }

    #[test]
    fn superattracting_period_two_matches_polynomial_root() {
        let w = DyadicInterval::new(DyadicRational::from_int(3), DyadicRational::from_int(4));
        let out = find_superattracting(&w, 2, 40).unwrap();
        // 1 + sqrt(5): the real root of a^3 - 4a^2 + 8 in (3,4)
        let root = DyadicRational::from_f64(1.0 + 5f64.sqrt()).unwrap();
        assert!(out.inflate(&DyadicRational::pow2(-38)).contains(&root));
    }

    #[test]
    fn critical_fixed_point_certificate() {
        let a = iv(2.0);
        let cert = certify_sink(
            &a,
            &DyadicRational::from_parts(1, 1),
            8,
            5,
            40,
            4096,
            7,
            256,
        )
        .unwrap();
        assert_eq!(cert.period(), 1);
        assert!(cert.orbit[0].contains(&DyadicRational::from_parts(1, 1)));
        assert!(cert.multiplier.contains(&DyadicRational::zero()));
        assert!(cert.basin_evidence.iter().all(|s| s.converged));
    }

    #[test]
    fn period_two_multiplier_closed_form() {
        // at a = 3.2 the 2-cycle multiplier is 4 + 2a - a^2 = 0.16
        let a = iv(3.2);
        let cert = certify_sink(
            &a,
            &DyadicRational::from_parts(1, 2),
            8,
            3,
            48,
            4096,
            11,
            320,
        )
        .unwrap();
        assert_eq!(cert.period(), 2);
        let expect = DyadicRational::from_f64(0.16).unwrap();
        assert!(cert.multiplier.inflate(&DyadicRational::pow2(-20)).contains(&expect));
    }
}
