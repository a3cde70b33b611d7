//! Birkhoff and Monte Carlo empirical measures.
//!
//! Two arithmetic regimes coexist deliberately. Certified enclosures back
//! the Birkhoff measure (orbit atoms carry a maximum enclosure width in the
//! metadata). The ensemble Monte Carlo measure simulates in 64-bit
//! fixed-point with round-to-nearest — the whole point of that object is to
//! model finite-precision statistical sampling — and every simulated value
//! is still an exact dyadic, so the measure machinery downstream stays
//! exact. The scheme is versioned as `mc-fixed64-v1`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::numerics::{iterate_trajectory, DyadicInterval, DyadicRational, Rounding};
use crate::ratio;
use crate::rng;

use super::discrete::DiscreteMeasure;
use super::MeasuresError;

/// Atom positions are reported at this many fractional bits; enclosure
/// midpoints at full working precision would bloat every downstream
/// computation for no statistical gain.
const ATOM_REPORT_BITS: u64 = 128;

/// Empirical measure `(1/n) sum_{k=0}^{n-1} delta_{f^k x}` from certified
/// orbit enclosures. Returns the measure and the maximum enclosure width
/// encountered (also recorded in `meta`).
pub fn birkhoff_measure(
    a: &DyadicInterval,
    x: &DyadicInterval,
    n: u64,
    work_bits: u64,
) -> Result<(DiscreteMeasure, DyadicRational), MeasuresError> {
    if n == 0 {
        return Err(MeasuresError::Empty);
    }
    let traj = iterate_trajectory(a, x, n - 1, work_bits)?;
    measure_from_enclosures(&traj, "birkhoff-v1", work_bits)
}

pub(crate) fn measure_from_enclosures(
    enclosures: &[DyadicInterval],
    scheme: &str,
    work_bits: u64,
) -> Result<(DiscreteMeasure, DyadicRational), MeasuresError> {
    let mut max_width = DyadicRational::zero();
    let points = enclosures
        .iter()
        .map(|iv| {
            let w = iv.width();
            if w > max_width {
                max_width = w;
            }
            iv.midpoint().round_to_bits(ATOM_REPORT_BITS, Rounding::Nearest)
        })
        .collect();
    let mut mu = DiscreteMeasure::uniform(points)?;
    mu.meta.insert("scheme".into(), scheme.into());
    mu.meta.insert("work_bits".into(), work_bits.into());
    mu.meta.insert("max_enclosure_width_log2".into(), width_log2_json(&max_width));
    Ok((mu, max_width))
}

fn width_log2_json(w: &DyadicRational) -> serde_json::Value {
    if w.is_zero() {
        serde_json::Value::String("-inf".into())
    } else {
        serde_json::Value::from(w.num_bits() as i64 - w.exponent() as i64)
    }
}

/// Fixed-point scale of the parameter: `round(a * 2^64)` for `a in [0,4]`.
pub fn fixed_scale(a: &BigRational) -> Result<u128, MeasuresError> {
    if a < &BigRational::zero() || a > &ratio::rat(4, 1) {
        return Err(MeasuresError::ParameterOutOfRange(ratio::to_pq(a)));
    }
    let scaled = a * BigRational::from_integer(BigInt::from(1u128) << 64);
    let rounded = (scaled + ratio::rat(1, 2)).floor().to_integer();
    let digits = rounded.to_u64_digits().1;
    let mut v: u128 = 0;
    for d in digits.iter().rev() {
        v = (v << 64) | *d as u128;
    }
    Ok(v)
}

/// One fixed-point logistic step with round-to-nearest at 64 fractional
/// bits.
#[inline]
pub fn fixed_step(a_fix: u128, x: u64) -> u64 {
    let xe = x as u128;
    let p = xe * ((1u128 << 64) - xe);
    let t = (p + (1 << 63)) >> 64; // x(1-x), <= 2^62
    match a_fix.checked_mul(t) {
        Some(q) => {
            let y = (q + (1 << 63)) >> 64;
            if y > u64::MAX as u128 {
                u64::MAX
            } else {
                y as u64
            }
        }
        // only reachable at a = 4 exactly with x = 1/2: f(x) = 1
        None => u64::MAX,
    }
}

pub fn dyadic_from_fixed(x: u64) -> DyadicRational {
    DyadicRational::new(BigInt::from(x), 64)
}

/// Monte Carlo ensemble measure `mu_{k,n}`: `k` seeded-uniform starting
/// points, iterates `m = 1..n` of each, all with weight `1/(k n)`.
/// Deterministic for a fixed seed regardless of evaluation order: each
/// starting point draws from its own substream.
pub fn monte_carlo_measure(
    a: &BigRational,
    k: u64,
    n: u64,
    seed: u64,
) -> Result<DiscreteMeasure, MeasuresError> {
    if k == 0 || n == 0 {
        return Err(MeasuresError::Empty);
    }
    let a_fix = fixed_scale(a)?;
    let mut samples: Vec<u64> = Vec::with_capacity((k * n) as usize);
    for l in 0..k {
        let mut stream = rng::substream_indexed(seed, "mc-start", l);
        let mut x = rng::unit_u64(&mut stream);
        for _ in 0..n {
            x = fixed_step(a_fix, x);
            samples.push(x);
        }
    }
    samples.sort_unstable();
    let total = BigRational::from_integer(BigInt::from(k) * BigInt::from(n));
    let mut pairs: Vec<(DyadicRational, BigRational)> = Vec::new();
    let mut i = 0;
    while i < samples.len() {
        let mut j = i + 1;
        while j < samples.len() && samples[j] == samples[i] {
            j += 1;
        }
        let w = BigRational::from_integer(BigInt::from((j - i) as u64)) / &total;
        pairs.push((dyadic_from_fixed(samples[i]), w));
        i = j;
    }
    let mut mu = DiscreteMeasure::new(pairs)?;
    mu.meta.insert("scheme".into(), "mc-fixed64-v1".into());
    mu.meta.insert("seed".into(), seed.into());
    mu.meta.insert("k".into(), k.into());
    mu.meta.insert("n".into(), n.into());
    mu.meta.insert("a".into(), ratio::to_pq(a).into());
    Ok(mu)
}

/// Exact mean of a long single-orbit average in the same fixed-point
/// scheme; the independent cross-check for ensemble statistics.
pub fn orbit_average_fixed(a: &BigRational, n: u64, seed: u64) -> Result<BigRational, MeasuresError> {
    let a_fix = fixed_scale(a)?;
    let mut stream = rng::substream(seed, "orbit-average");
    let mut x = rng::unit_u64(&mut stream);
    let mut sum: u128 = 0;
    let mut carry: u64 = 0; // count of 2^128 overflows; n <= 2^63 keeps this 0
    for _ in 0..n {
        x = fixed_step(a_fix, x);
        let (s, o) = sum.overflowing_add(x as u128);
        sum = s;
        if o {
            carry += 1;
        }
    }
    let total = BigRational::from_integer(
        (BigInt::from(carry) << 128) + BigInt::from(sum),
    );
    Ok(total / BigRational::from_integer(BigInt::from(n) << 64))
}

/// Successive W1 gaps of the Birkhoff measure along an increasing schedule.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub checkpoints: Vec<Checkpoint>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub n: u64,
    #[serde(with = "ratio::pq_string")]
    pub w1_gap: BigRational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converged,
    Inconclusive,
}

/// Finite surrogate of the limit-set diagnostic: converged iff every gap in
/// the second half of the schedule is below `tol`.
pub fn omega_diagnostic(
    a: &DyadicInterval,
    x: &DyadicInterval,
    schedule: &[u64],
    tol: &BigRational,
    work_bits: u64,
) -> Result<ConvergenceReport, MeasuresError> {
    if schedule.is_empty() || schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(MeasuresError::BadSchedule);
    }
    let n_max = *schedule.last().unwrap();
    let traj = iterate_trajectory(a, x, n_max - 1, work_bits)?;
    let mut prev: Option<DiscreteMeasure> = None;
    let mut checkpoints = Vec::new();
    for &n in schedule {
        let (mu, _) = measure_from_enclosures(&traj[..n as usize], "birkhoff-v1", work_bits)?;
        if let Some(p) = &prev {
            checkpoints.push(Checkpoint { n, w1_gap: p.w1(&mu) });
        }
        prev = Some(mu);
    }
    let half = checkpoints.len() / 2;
    let converged = !checkpoints.is_empty() && checkpoints[half..].iter().all(|c| &c.w1_gap < tol);
    Ok(ConvergenceReport {
        checkpoints,
        verdict: if converged { Verdict::Converged } else { Verdict::Inconclusive },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::work_bits_for;
    use num_bigint::BigInt;
    use num_traits::Signed;

    fn pt(k: i64, m: u64) -> DyadicInterval {
        DyadicInterval::point(DyadicRational::from_parts(k, m))
    }

    #[test]
    fn single_term_is_dirac() {
        let (mu, _) = birkhoff_measure(&pt(2, 0), &pt(1, 2), 1, 128).unwrap();
        assert_eq!(mu.len(), 1);
        assert_eq!(mu.atoms()[0].x, DyadicRational::from_parts(1, 2));
    }

    #[test]
    fn fixed_point_orbit_merges() {
        // a = 2, x0 = 0.5: every atom is exactly 0.5
        let (mu, w) = birkhoff_measure(&pt(2, 0), &pt(1, 1), 10_000, work_bits_for(10_000)).unwrap();
        assert_eq!(mu.len(), 1);
        assert!(w < DyadicRational::pow2(-1000));
    }

    #[test]
    fn exact_rational_orbit_atoms() {
        // a = 4, x = 0.4: atoms {0.4, 0.96, 0.1536}, weight 1/3 each.
        // 0.4 is not dyadic; use its exact enclosure at 80 bits.
        let a = pt(4, 0);
        let r = ratio::rat(2, 5);
        let lo = (r.clone() * ratio::pow2(80)).floor().to_integer();
        let x = DyadicInterval::new(
            DyadicRational::new(lo.clone(), 80),
            DyadicRational::new(lo + BigInt::from(1), 80),
        );
        let (mu, _) = birkhoff_measure(&a, &x, 3, 256).unwrap();
        assert_eq!(mu.len(), 3);
        let expect = [ratio::rat(384, 2500), ratio::rat(2, 5), ratio::rat(24, 25)];
        for (atom, e) in mu.atoms().iter().zip(expect.iter()) {
            let got = atom.x.to_rational();
            assert!((got - e).abs() < ratio::pow2(-70));
        }
    }

    #[test]
    fn mc_is_deterministic_and_normalized() {
        let a = ratio::rat(2, 1);
        let m1 = monte_carlo_measure(&a, 3, 50, 42).unwrap();
        let m2 = monte_carlo_measure(&a, 3, 50, 42).unwrap();
        assert_eq!(m1.w1(&m2), BigRational::zero());
        assert_eq!(m1.total_mass(), BigRational::from_integer(BigInt::from(1)));
        // a = 2: global attractor at 0.5; by n = 50 all ensemble mass is there
        let sink = DiscreteMeasure::dirac(DyadicRational::from_parts(1, 1));
        assert!(m1.w1(&sink) < ratio::rat(1, 100));
    }

    #[test]
    fn mc_with_one_start_matches_shifted_birkhoff() {
        // k = 1: mu_{1,n} = (1/n) sum_{m=1..n} delta_{f^m(x0)}; compare with a
        // fixed-point replay of the same substream.
        let a = ratio::rat(7, 2);
        let mu = monte_carlo_measure(&a, 1, 40, 9).unwrap();
        let a_fix = fixed_scale(&a).unwrap();
        let mut stream = rng::substream_indexed(9, "mc-start", 0);
        let mut x = rng::unit_u64(&mut stream);
        let mut pts = Vec::new();
        for _ in 0..40 {
            x = fixed_step(a_fix, x);
            pts.push(dyadic_from_fixed(x));
        }
        let nu = DiscreteMeasure::uniform(pts).unwrap();
        assert_eq!(mu.w1(&nu), BigRational::zero());
    }

    #[test]
    fn omega_converges_at_attracting_fixed_point() {
        let a = pt(2, 0);
        let x = pt(5, 4); // 0.3125
        let schedule = [50, 100, 200, 400, 800];
        let rep = omega_diagnostic(&a, &x, &schedule, &ratio::rat(1, 50), work_bits_for(800)).unwrap();
        assert_eq!(rep.verdict, Verdict::Converged);
        // the limit is delta_{1/2}
        let (mu, _) = birkhoff_measure(&a, &x, 800, work_bits_for(800)).unwrap();
        let sink = DiscreteMeasure::dirac(DyadicRational::from_parts(1, 1));
        assert!(mu.w1(&sink) < ratio::rat(1, 100));
    }
}
