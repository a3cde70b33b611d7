//! Parameter steering via a certified first-order model of the critical
//! orbit over a bracket.
//!
//! For a bracket `[a0 - w, a0 + w]` the state tracks the center orbit
//! `c_t = f^t_{a0}(1/2)`, the parameter derivative `d_t`, and a remainder
//! bound `e_t` with the invariant
//!
//! ```text
//!   |f^t_a(1/2) - (c_t + d_t (a - a0))| <= e_t   for all |a - a0| <= w.
//! ```
//!
//! The affine part sweeps an x-interval as `a` crosses the bracket;
//! steering narrows the bracket so the sweep lands in a target window, and
//! re-centers (fresh simulation at the new midpoint) to collapse the
//! remainder. Narrowing onto a window is quadratically convergent in `e`,
//! which is what makes deep pullback windows reachable.

use num_rational::BigRational;

use crate::numerics::{DyadicInterval, DyadicRational, Rounding};

use super::TunerError;

/// Significant bits kept in error-term arithmetic.
const ERR_BITS: u64 = 48;

/// Round up to `ERR_BITS` significant bits (relative, never absolute — an
/// error bound must be allowed to be arbitrarily small).
fn up(x: DyadicRational) -> DyadicRational {
    let nb = x.num_bits();
    if nb <= ERR_BITS {
        return x;
    }
    let drop = nb - ERR_BITS;
    if x.exponent() >= drop {
        x.round_to_bits(x.exponent() - drop, Rounding::Ceil)
    } else {
        // magnitude at least 2^ERR_BITS: saturation handles it upstream
        x
    }
}

/// First-order model of the critical orbit over the current bracket.
#[derive(Debug, Clone)]
pub struct CriticalOrbit {
    pub a0: DyadicRational,
    /// Half-width of the bracket.
    pub w: DyadicRational,
    /// Center orbit value, rounded to `prec` fractional bits each step.
    pub c: DyadicRational,
    /// Parameter derivative of the center orbit (low precision).
    pub d: DyadicRational,
    /// Remainder bound; includes all rounding.
    pub e: DyadicRational,
    pub t: u64,
    pub prec: u64,
}

impl CriticalOrbit {
    pub fn new(bracket: &DyadicInterval, prec: u64) -> Self {
        let a0 = bracket.midpoint();
        let w = up(bracket.width().halve());
        CriticalOrbit {
            a0,
            w,
            c: DyadicRational::from_parts(1, 1),
            d: DyadicRational::zero(),
            e: DyadicRational::zero(),
            t: 0,
            prec,
        }
    }

    pub fn bracket(&self) -> DyadicInterval {
        DyadicInterval::new(self.a0.sub(&self.w), self.a0.add(&self.w))
    }

    /// One logistic step of the model.
    pub fn step(&mut self) {
        let one = DyadicRational::one();
        let q = self.c.mul(&one.sub(&self.c)); // c(1-c), exact
        let one_minus_2c = one.sub(&self.c.mul_pow2(1));
        // new center, rounded
        let c_next = self.a0.mul(&q).round_to_bits(self.prec, Rounding::Nearest);
        let rho_c = DyadicRational::pow2(-(self.prec as i64));
        // new derivative, low precision
        let d_next =
            self.a0.mul(&one_minus_2c).mul(&self.d).add(&q).round_to_bits(128, Rounding::Nearest);
        let rho_d = DyadicRational::pow2(-120);
        // remainder recursion; saturate at 2 (the hull is clamped to [0,1]
        // anyway, and an errorbound past the whole phase space carries no
        // information but its bit-length would otherwise explode)
        let sat = DyadicRational::from_int(2);
        let abs_f1 = up(self.a0.mul(&one_minus_2c).abs());
        let u = up(self.d.abs().mul(&self.w).add(&self.e)).min(sat.clone());
        let four = DyadicRational::from_int(4);
        let e_next = up(abs_f1
            .mul(&self.e)
            .add(&four.mul(&u).mul(&u))
            .add(&self.w.mul(&one_minus_2c.abs()).mul(&u))
            .add(&rho_c)
            .add(&self.w.mul(&rho_d)))
        .min(sat);
        self.c = c_next;
        self.d = d_next;
        self.e = e_next;
        self.t += 1;
    }

    /// Certified hull of `x_t(a)` over the bracket, clamped to the
    /// invariant domain.
    pub fn hull(&self) -> DyadicInterval {
        let spread = self.d.abs().mul(&self.w).add(&self.e);
        let raw = DyadicInterval::new(self.c.sub(&spread), self.c.add(&spread));
        raw.intersect(&DyadicInterval::new(DyadicRational::zero(), DyadicRational::one()))
            .unwrap_or(raw)
    }

    /// Interval certified to be covered by the sweep (by the intermediate
    /// value theorem applied to the affine model): empty-ish when the
    /// remainder dominates.
    pub fn guaranteed_sweep(&self) -> Option<DyadicInterval> {
        let inner = self.d.abs().mul(&self.w).sub(&self.e);
        if !inner.is_positive() {
            return None;
        }
        Some(DyadicInterval::new(self.c.sub(&inner), self.c.add(&inner)))
    }

    /// Sub-bracket on which the model guarantees `x_t(a)` inside `target`.
    /// Requires the sweep to cover the (remainder-shrunk) target.
    pub fn narrow_onto(&self, target: &DyadicInterval) -> Result<DyadicInterval, TunerError> {
        let sweep = self.guaranteed_sweep().ok_or(TunerError::RemainderDominates { t: self.t })?;
        if !sweep.contains_interval(target) {
            return Err(TunerError::SweepTooNarrow { t: self.t });
        }
        // need c + d*Delta in [lo + e, hi - e]
        let lo_x = target.lo().add(&self.e);
        let hi_x = target.hi().sub(&self.e);
        if lo_x >= hi_x {
            return Err(TunerError::RemainderDominates { t: self.t });
        }
        let d_r = self.d.to_rational();
        let lo_delta = (lo_x.sub(&self.c)).to_rational() / &d_r;
        let hi_delta = (hi_x.sub(&self.c)).to_rational() / &d_r;
        let (dlo, dhi) =
            if lo_delta <= hi_delta { (lo_delta, hi_delta) } else { (hi_delta, lo_delta) };
        let grid = self.prec + 64;
        let a_lo = self.a0.add(&dyadic_ceil(&dlo, grid));
        let a_hi = self.a0.add(&dyadic_floor(&dhi, grid));
        if a_lo >= a_hi {
            return Err(TunerError::WindowCollapse { t: self.t });
        }
        let sub = DyadicInterval::new(a_lo, a_hi)
            .intersect(&self.bracket())
            .ok_or(TunerError::WindowCollapse { t: self.t })?;
        if sub.width().is_zero() {
            return Err(TunerError::WindowCollapse { t: self.t });
        }
        Ok(sub)
    }
}

pub(crate) fn dyadic_floor(r: &BigRational, bits: u64) -> DyadicRational {
    let scaled = r * crate::ratio::pow2(bits as i64);
    DyadicRational::new(scaled.floor().to_integer(), bits)
}

pub(crate) fn dyadic_ceil(r: &BigRational, bits: u64) -> DyadicRational {
    let scaled = r * crate::ratio::pow2(bits as i64);
    DyadicRational::new(scaled.ceil().to_integer(), bits)
}

/// Replay a fresh model on a sub-bracket up to time `t` (a re-centering).
pub fn recenter(bracket: &DyadicInterval, t: u64, prec: u64) -> CriticalOrbit {
    let mut m = CriticalOrbit::new(bracket, prec);
    for _ in 0..t {
        m.step();
    }
    m
}

/// Steering state: the surviving bracket plus the current orbit model.
#[derive(Debug, Clone)]
pub struct SteerState {
    pub bracket: DyadicInterval,
    pub model: CriticalOrbit,
    pub full_prec: u64,
}

impl SteerState {
    pub fn new(bracket: DyadicInterval, full_prec: u64) -> Self {
        let model = CriticalOrbit::new(&bracket, full_prec);
        SteerState { bracket, model, full_prec }
    }
}

/// The navigation aim: centered on the target, never thinner than the
/// remainder scale (so the parameter sub-bracket stays nonempty and the
/// re-centered orbit lands near the target's middle).
fn aim_at(target: &DyadicInterval, e: &DyadicRational) -> DyadicInterval {
    let c = target.midpoint();
    // strictly inside the target so the final hull (aim plus remainder)
    // still fits
    let r = target
        .width()
        .mul(&DyadicRational::from_parts(3, 3))
        .max(e.mul_pow2(1));
    DyadicInterval::new(c.sub(&r), c.add(&r))
}

/// One remainder-ratio repair: re-center on a bracket sized so the sweep
/// is around `2^-6`, where the quadratic remainder is under control.
/// Returns whether the model changed.
fn repair_ratio(state: &mut SteerState) -> bool {
    let spread = state.model.d.abs().mul(&state.model.w);
    if state.model.e.mul_pow2(3) <= spread || state.model.w.is_zero() {
        return false;
    }
    let d_abs = state.model.d.abs();
    let half_w = if d_abs.is_zero() {
        state.model.w.halve()
    } else {
        let ideal = dyadic_floor(
            &(DyadicRational::pow2(-6).to_rational() / d_abs.to_rational()),
            state.model.prec,
        );
        ideal.min(state.model.w.halve())
    };
    if !half_w.is_positive() {
        return false;
    }
    let mid = state.bracket.midpoint();
    let sub = DyadicInterval::new(mid.sub(&half_w), mid.add(&half_w));
    let next = recenter(&sub, state.model.t, state.model.prec);
    let old_cross = state.model.e.mul(&next.d.abs().mul(&next.w));
    let new_cross = next.e.mul(&spread);
    if std::env::var("LOGLAB_STEER_DEBUG").is_ok() {
        eprintln!(
            "  repair: w {:.2e} -> {:.2e}, e {:.2e} -> {:.2e}, improved={}",
            state.model.w.to_f64(),
            next.w.to_f64(),
            state.model.e.to_f64(),
            next.e.to_f64(),
            new_cross < old_cross
        );
    }
    if new_cross < old_cross {
        state.model = next;
        state.bracket = sub;
        true
    } else {
        false
    }
}

/// Develop the sweep until it covers `target`, then iterate
/// narrow/re-center until the whole-bracket hull sits inside it.
///
/// Re-centering collapses the model remainder roughly quadratically, so a
/// window thousands of bits deep costs only a logarithmic number of replay
/// passes; passes run at a precision matched to the remainder they chase.
pub fn narrow_with_recovery(
    state: &mut SteerState,
    target: &DyadicInterval,
) -> Result<(), TunerError> {
    // develop until the guaranteed sweep covers the target with room for
    // the remainder-inflated aim; the remainder is quadratic in the bracket
    // width, so halving the bracket whenever it catches up with the sweep
    // keeps the model healthy while the center orbit approaches the target
    let mut developed = 0u64;
    loop {
        if let Some(sweep) = state.model.guaranteed_sweep() {
            let aim = aim_at(target, &state.model.e.mul_pow2(1));
            if sweep.contains_interval(&aim) {
                break;
            }
        }
        if repair_ratio(state) {
            developed += 1;
            if developed > 4096 {
                return Err(TunerError::SweepTooNarrow { t: state.model.t });
            }
            continue;
        }
        state.model.step();
        developed += 1;
        if developed > 4096 {
            return Err(TunerError::SweepTooNarrow { t: state.model.t });
        }
    }
    // iterated narrowing: each re-center collapses the remainder
    for _iter in 0..96 {
        if std::env::var("LOGLAB_STEER_DEBUG").is_ok() {
            eprintln!(
                "narrow iter {_iter}: t={} c={:.9} dw={:.3e} e={:.3e} hullw={:.3e} targw={:.3e}",
                state.model.t,
                state.model.c.to_f64(),
                state.model.d.abs().mul(&state.model.w).to_f64(),
                state.model.e.to_f64(),
                state.model.hull().width().to_f64(),
                target.width().to_f64()
            );
        }
        if target.contains_interval(&state.model.hull()) {
            return Ok(());
        }
        // keep the remainder-to-sweep ratio healthy before aiming; without
        // this, a fold passage along the replayed path can pin the
        // remainder at the sweep scale and stall the iteration
        while repair_ratio(state) {}
        if target.contains_interval(&state.model.hull()) {
            return Ok(());
        }
        // aim at the target's center, padded by the current remainder so
        // the sub-bracket stays nonempty; a re-centered orbit may land
        // off-center by its old remainder, so the radius ladders up until
        // the sweep covers the aim. progress stays quadratic in e
        let mut pad = state.model.e.clone();
        let mut sub = None;
        for _ in 0..24 {
            match state.model.narrow_onto(&aim_at(target, &pad)) {
                Ok(s) => {
                    sub = Some(s);
                    break;
                }
                Err(TunerError::RemainderDominates { .. })
                | Err(TunerError::SweepTooNarrow { .. })
                | Err(TunerError::WindowCollapse { .. }) => {
                    if std::env::var("LOGLAB_STEER_DEBUG").is_ok() {
                        eprintln!("  ladder pad={:.3e} failed", pad.to_f64());
                    }
                    pad = pad.mul_pow2(1).max(target.width());
                }
                Err(e) => return Err(e),
            }
        }
        let Some(sub) = sub else {
            if std::env::var("LOGLAB_STEER_DEBUG").is_ok() {
                eprintln!(
                    "ladder exhausted: t={} dw={:.3e} e={:.3e} pad-final={:.3e}",
                    state.model.t,
                    state.model.d.abs().mul(&state.model.w).to_f64(),
                    state.model.e.to_f64(),
                    0.0
                );
            }
            return Err(TunerError::WindowCollapse { t: state.model.t });
        };
        let t = state.model.t;
        // recenter at a precision matched to the remainder we expect next
        let e_bits = {
            let e = &state.model.e;
            if e.is_zero() {
                state.full_prec
            } else {
                (e.exponent() as i64 - e.num_bits() as i64).max(0) as u64
            }
        };
        let prec = (2 * e_bits + (14 * t) / 10 + 256).min(state.full_prec);
        let next = recenter(&sub, t, prec);
        if !next.e.is_zero() && next.e >= state.model.e && prec >= state.full_prec {
            return Err(TunerError::RemainderDominates { t });
        }
        state.bracket = sub;
        state.model = next;
    }
    Err(TunerError::WindowCollapse { t: state.model.t })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_brackets_the_true_orbit() {
        // certified check: iterate probe parameters with interval
        // arithmetic and verify each enclosure sits inside the affine bound
        use crate::numerics::iterate_enclosure;
        let bracket = DyadicInterval::new(
            DyadicRational::from_f64(3.90).unwrap(),
            DyadicRational::from_f64(3.90001).unwrap(),
        );
        let mut m = CriticalOrbit::new(&bracket, 512);
        let probes: Vec<DyadicRational> = (0..=4)
            .map(|i| {
                bracket
                    .lo()
                    .add(&bracket.width().mul(&DyadicRational::from_parts(i, 2)))
            })
            .collect();
        let mut verified = 0;
        for _ in 0..40 {
            m.step();
            if m.e >= DyadicRational::pow2(-4) {
                // saturated: the model makes no useful claim past here
                break;
            }
            verified += 1;
            for a in &probes {
                let enc = iterate_enclosure(
                    &DyadicInterval::point(a.clone()),
                    &DyadicInterval::point(DyadicRational::from_parts(1, 1)),
                    m.t,
                    512,
                )
                .unwrap();
                let affine = m.c.add(&m.d.mul(&a.sub(&m.a0)));
                let bound = DyadicInterval::point(affine).inflate(&m.e);
                assert!(
                    bound.inflate(&DyadicRational::pow2(-400)).contains_interval(&enc),
                    "model bound violated at t={} (e={:?})",
                    m.t,
                    m.e
                );
            }
        }
        assert!(verified >= 15, "model saturated too early ({verified} verified steps)");
        // the sweep develops: the bracket's image becomes macroscopic
        assert!(m.hull().width() > DyadicRational::pow2(-14));
    }

    #[test]
    fn narrowing_lands_in_the_window() {
        let bracket = DyadicInterval::new(
            DyadicRational::from_f64(3.90).unwrap(),
            DyadicRational::from_f64(3.92).unwrap(),
        );
        let mut state = SteerState::new(bracket.clone(), 1024);
        let target = DyadicInterval::new(
            DyadicRational::from_f64(0.510).unwrap(),
            DyadicRational::from_f64(0.512).unwrap(),
        );
        narrow_with_recovery(&mut state, &target).unwrap();
        assert!(target.contains_interval(&state.model.hull()));
        assert!(bracket.contains_interval(&state.bracket));
        // and a much deeper target is reachable by iterated recentering
        let deep = DyadicInterval::new(
            DyadicRational::from_f64(0.510000000).unwrap(),
            DyadicRational::from_f64(0.510000001).unwrap(),
        );
        let t_before = state.model.t;
        narrow_with_recovery(&mut state, &deep).unwrap();
        assert!(deep.contains_interval(&state.model.hull()));
        // reaching a 2^-30 window costs at most a short revisit, not a
        // fresh excursion
        assert!(state.model.t - t_before < 120);
    }
}
