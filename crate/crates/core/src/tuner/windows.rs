//! Pullback windows: nested intervals along an inverse branch fixing a
//! periodic point. Entering a deep window forces the orbit to dwell near
//! the anchor orbit for the chain length.

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    g_box, solve_g_preimage_sided, solve_periodic_orbit_at, PeriodicOrbit,
    PreimageSide, StageGeometry,
};
use crate::numerics::{iterate_enclosure, DyadicInterval, DyadicRational};
use crate::ratio;

use super::TunerError;

/// One window of a chain, in full-word units: applying the word map
/// `depth` times lands in the depth-0 window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PullbackWindow {
    pub depth: u64,
    pub interval: DyadicInterval,
    pub anchor_orbit: u64,
}

/// A full chain with its certificates, as produced by [`pullback_windows`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowChain {
    pub anchor_orbit: u64,
    /// Windows at full-word depths `0..=max_depth`.
    pub windows: Vec<PullbackWindow>,
    /// Single-g-step levels: `levels[j]` maps to `levels[j-1]` in one
    /// application of `g`; `levels[0]` is the depth-0 window.
    pub levels: Vec<DyadicInterval>,
    /// Certified spreading exponent: a univalent branch of `f^s` maps the
    /// depth-0 window over a neighborhood of `I`.
    pub spreading_exponent: u64,
    /// Width ratios of consecutive full-word windows, as `p/q` strings.
    pub contraction_ratios: Vec<String>,
}

/// Anchor data the tuner reuses across chains.
pub(crate) struct Anchor {
    pub orbit: PeriodicOrbit,
    /// Right end of the depth-0 window, `x0 = p + d0`.
    pub x0: DyadicRational,
    /// Left end of the depth-0 window.
    pub x0_inner: DyadicRational,
    /// Whether the depth-0 window sits right of `beta` (anchor orbit 1) or
    /// inside `I`.
    pub outside: bool,
}

fn pow2(e: i64) -> DyadicRational {
    DyadicRational::pow2(e)
}

/// Build the depth-0 window for an anchor orbit.
pub(crate) fn build_anchor(
    stage: &StageGeometry,
    orbit_index: u64,
    bits: u64,
) -> Result<Anchor, TunerError> {
    let orbit = solve_periodic_orbit_at(stage, orbit_index, bits)?;
    if orbit_index == 1 {
        // window right of beta: [beta + d/rho, beta + d], spreading via f^2
        let beta_hi = stage.beta.hi().clone();
        // largest d with f^2(beta + d) certified past beta and the first
        // image certified above 1/2 (univalence); the window must also stay
        // inside the image of the extended right branch so it can be pulled
        // back
        let wb_dom = 4 * bits + 256;
        let g_t = g_box(
            &stage.a,
            &DyadicInterval::point(stage.right_extension.clone()),
            wb_dom,
        )?;
        let cap = g_t.lo().sub(&beta_hi).mul_pow2(-1);
        let mut d = cap.min(DyadicRational::from_parts(1, 2)); // <= 1/4
        let wb = 4 * bits + 256;
        loop {
            if d < pow2(-20) {
                return Err(TunerError::SpreadingFailed { orbit: orbit_index });
            }
            let x0 = beta_hi.add(&d);
            let xi = DyadicInterval::point(x0.clone());
            let f1 = iterate_enclosure(&stage.a, &xi, 1, wb)?;
            let f2 = iterate_enclosure(&stage.a, &f1, 1, wb)?;
            let margin = pow2(-8);
            if f1.lo() > &DyadicRational::from_parts(1, 1)
                && f2.lo() > &stage.beta.hi().add(&margin)
            {
                // inner end: one g-preimage of x0 along the right branch,
                // certified above beta
                let pre = crate::dynamics::solve_g_preimage(
                    stage,
                    &DyadicInterval::point(x0.clone()),
                    true,
                    bits + 16,
                )?;
                let x0_inner = pre.hi().add(&pow2(-(bits as i64)));
                if x0_inner <= beta_hi {
                    return Err(TunerError::SpreadingFailed { orbit: orbit_index });
                }
                return Ok(Anchor { orbit, x0, x0_inner, outside: true });
            }
            d = d.mul(&DyadicRational::from_parts(3, 2)); // 3/4
        }
    } else {
        // window right of the anchor point p, inside the horseshoe
        let p = orbit.g_points[0].clone();
        // distance to the nearest structure on the right
        let mut d0 = DyadicRational::from_parts(1, 5); // 1/32 cap
        for q in orbit.f_points.iter() {
            if q.lo() > p.hi() {
                let gap = q.lo().sub(p.hi());
                d0 = d0.min(gap.halve());
            }
        }
        for lm in [&stage.l, &stage.r, &stage.beta] {
            if lm.lo() > p.hi() {
                d0 = d0.min(lm.lo().sub(p.hi()).halve());
            }
        }
        let x0 = p.hi().add(&d0);
        let x0_inner = p.hi().add(&d0.halve());
        Ok(Anchor { orbit, x0, x0_inner, outside: false })
    }
}

/// Pull the chain back level by level (single g-steps), cycling through the
/// anchor word's letters. Returns `levels[0..=g_steps]`. Each pullback is
/// warm-started from a neighborhood of the orbit point it converges to.
pub(crate) fn build_levels(
    stage: &StageGeometry,
    anchor: &Anchor,
    g_steps: u64,
    depth_bits_budget: u64,
) -> Result<Vec<DyadicInterval>, TunerError> {
    build_levels_floored(stage, anchor, g_steps, depth_bits_budget, None)
}

/// As [`build_levels`], stopping early once windows reach `floor_width`.
pub(crate) fn build_levels_floored(
    stage: &StageGeometry,
    anchor: &Anchor,
    g_steps: u64,
    depth_bits_budget: u64,
    floor_width: Option<&DyadicRational>,
) -> Result<Vec<DyadicInterval>, TunerError> {
    let letters = anchor.orbit.word.letters();
    let k = letters.len();
    let mut levels = Vec::with_capacity(g_steps as usize + 1);
    let j0 = DyadicInterval::new(anchor.x0_inner.clone(), anchor.x0.clone());
    levels.push(j0);
    let solve_bits = depth_bits_budget + 64;
    for j in 1..=g_steps {
        // the point at level j sits in branch letters[(k - j mod k) mod k],
        // converging to the orbit point with that rotation
        let li = (k - (j as usize % k)) % k;
        let letter = letters[li];
        let prev = levels.last().unwrap();
        if let Some(fw) = floor_width {
            if &prev.width() < fw {
                break;
            }
        }
        let p_prev = anchor_point(anchor, stage, (li + 1) % k);
        let p_next = anchor_point(anchor, stage, li);
        let reach = prev
            .lo()
            .sub(&p_prev)
            .abs()
            .max(prev.hi().sub(&p_prev).abs())
            .mul_pow2(2);
        let hint = DyadicInterval::new(p_next.sub(&reach), p_next.add(&reach));
        let increasing = if anchor.outside { true } else { letter };
        let next = solve_g_preimage_sided(
            stage,
            prev,
            increasing,
            solve_bits,
            Some(&hint),
            PreimageSide::Inner,
        )?;
        if next.width() >= prev.width() {
            return Err(TunerError::ContractionInconclusive { orbit: anchor.orbit.index });
        }
        levels.push(next);
    }
    Ok(levels)
}

fn anchor_point(anchor: &Anchor, stage: &StageGeometry, rotation: usize) -> DyadicRational {
    if anchor.outside {
        stage.beta.midpoint()
    } else {
        anchor.orbit.g_points[rotation].midpoint()
    }
}

/// The public chain constructor with all certificates.
pub fn pullback_windows(
    stage: &StageGeometry,
    orbit_index: u64,
    max_depth: u64,
    bits: u64,
) -> Result<WindowChain, TunerError> {
    let anchor = build_anchor(stage, orbit_index, bits)?;
    let k = anchor.orbit.word.g_period() as u64;
    let g_steps = max_depth * k;
    let depth_budget = (g_steps + 2) * 3 + bits + 64;
    let levels = build_levels(stage, &anchor, g_steps, depth_budget)?;

    let wb = 2 * depth_budget + 128;
    // forward-maps-into certificate, one g-step at a time
    for j in (1..levels.len()).rev() {
        let img = g_box(&stage.a, &levels[j], wb)?;
        if !levels[j - 1].contains_interval(&img) {
            return Err(TunerError::ChainUncertified { orbit: orbit_index, level: j as u64 });
        }
    }
    // disjointness from the anchor point and geometric convergence
    let p_enc = &anchor.orbit.g_points[0];
    let mut windows = Vec::with_capacity(max_depth as usize + 1);
    let mut contraction_ratios = Vec::new();
    let mut prev_width: Option<BigRational> = None;
    for depth in 0..=max_depth {
        let iv = levels[(depth * k) as usize].clone();
        if iv.intersects(p_enc) {
            return Err(TunerError::ChainUncertified { orbit: orbit_index, level: depth * k });
        }
        let wr = iv.width().to_rational();
        if let Some(pw) = prev_width {
            contraction_ratios.push(ratio::to_pq(&(&wr / pw)));
        }
        prev_width = Some(wr);
        windows.push(PullbackWindow { depth, interval: iv, anchor_orbit: orbit_index });
    }

    let spreading_exponent = certify_spreading(stage, &anchor, wb)?;

    Ok(WindowChain {
        anchor_orbit: orbit_index,
        windows,
        levels,
        spreading_exponent,
        contraction_ratios,
    })
}

/// Find and certify `s` with a univalent branch of `f^s` mapping the
/// depth-0 window over a neighborhood of `I`: forward endpoint images stay
/// on one side of 1/2 until the final image straddles all of `I`.
fn certify_spreading(
    stage: &StageGeometry,
    anchor: &Anchor,
    wb: u64,
) -> Result<u64, TunerError> {
    let half = DyadicRational::from_parts(1, 1);
    let mut u = DyadicInterval::point(anchor.x0_inner.clone());
    let mut v = DyadicInterval::point(anchor.x0.clone());
    for s in 1..=96u64 {
        let hull = u.hull(&v);
        // univalence of the next application: the current hull avoids 1/2
        if !(hull.lo() > &half || hull.hi() < &half) {
            return Err(TunerError::SpreadingFailed { orbit: anchor.orbit.index });
        }
        u = iterate_enclosure(&stage.a, &u, 1, wb)?;
        v = iterate_enclosure(&stage.a, &v, 1, wb)?;
        let (lo_img, hi_img) = if u.hi() < v.lo() { (&u, &v) } else { (&v, &u) };
        if lo_img.hi() < stage.beta_prime.lo() && hi_img.lo() > stage.beta.hi() {
            return Ok(s);
        }
    }
    Err(TunerError::SpreadingFailed { orbit: anchor.orbit.index })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::solve_stage;
    use crate::numerics::LazyParameter;

    use crate::dynamics::g_derivative_box;

    fn stage_39() -> StageGeometry {
        let mut a = LazyParameter::from_rational(&ratio::rat(39, 10));
        solve_stage(&mut a, 60).unwrap()
    }

    #[test]
    fn chain_for_beta_contracts_at_the_multiplier() {
        let st = stage_39();
        let chain = pullback_windows(&st, 1, 12, 40).unwrap();
        assert_eq!(chain.windows.len(), 13);
        // widths decrease monotonically
        for w in chain.windows.windows(2) {
            assert!(w[1].interval.width() < w[0].interval.width());
        }
        // tail ratio ~ 1/g'(beta); compare against the certified derivative
        let wb = 1024;
        let dbeta = g_derivative_box(&st.a, &st.beta, wb).unwrap();
        let inv_lo = BigRational::from_integer(1.into()) / dbeta.abs_upper().to_rational();
        let tail = ratio::from_pq(chain.contraction_ratios.last().unwrap()).unwrap();
        // within 20% of the linearization
        let rel = (tail.clone() * dbeta.abs_upper().to_rational()
            - BigRational::from_integer(1.into()))
        .abs();
        assert!(rel < ratio::rat(1, 5), "tail {tail} inv {inv_lo}");
        assert!(chain.spreading_exponent >= 1);
    }

    #[test]
    fn chain_for_word_orbit() {
        let st = stage_39();
        let chain = pullback_windows(&st, 3, 6, 36).unwrap();
        // depth-j windows map into depth-(j-1) after k g-steps: already
        // certified level-wise in the constructor; check disjointness from
        // the anchor here
        let anchor = solve_periodic_orbit_at(&st, 3, 36).unwrap();
        for w in &chain.windows {
            assert!(!w.interval.intersects(&anchor.g_points[0]));
        }
    }

    use num_traits::Signed;
}
