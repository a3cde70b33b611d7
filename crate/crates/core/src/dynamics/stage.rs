//! The third-iterate stage: `g_a = f_a^3` restricted to `I_a = [beta'_a,
//! beta_a]`, its two monotone branches, the tip parameter where the stage
//! is born, and certified landmark solving.
//!
//! All point searches run on the midpoint of the parameter interval with
//! escalating precision; every returned enclosure is then certified by
//! interval sign checks valid for the whole parameter interval.

use serde::{Deserialize, Serialize};

use crate::numerics::{
    iterate_enclosure, DyadicInterval, DyadicRational, LazyParameter, NumericsError,
};

use super::DynamicsError;

/// Landmark enclosures of the stage at a parameter interval.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageGeometry {
    pub a: DyadicInterval,
    /// The distinguished period-3 fixed point of `g` (right endpoint of `I`).
    pub beta: DyadicInterval,
    /// `1 - beta`, the left endpoint of `I`.
    pub beta_prime: DyadicInterval,
    /// Right endpoint of the left branch `L = [beta', l]`.
    pub l: DyadicInterval,
    /// Left endpoint of the right branch `R = [r, beta]`.
    pub r: DyadicInterval,
    /// A certified point `t > beta` up to which `g` stays monotone
    /// increasing; the pullback machinery uses the branch extension
    /// `(0.5, t]`.
    pub right_extension: DyadicRational,
    /// Solving precision: enclosure widths are `<= 2^-bits`.
    pub bits: u64,
}

/// `g = f^3` over boxes.
pub fn g_box(a: &DyadicInterval, x: &DyadicInterval, work_bits: u64) -> Result<DyadicInterval, NumericsError> {
    iterate_enclosure(a, x, 3, work_bits)
}

/// Certified sign of a box-valued function at escalating precision.
/// Returns the sign, or `None` if `max_bits` was reached while straddling
/// zero and the value never became exact.
pub(crate) fn escalating_sign(
    mut eval: impl FnMut(u64) -> Result<DyadicInterval, NumericsError>,
    start_bits: u64,
    max_bits: u64,
) -> Result<Option<i32>, NumericsError> {
    let mut wb = start_bits;
    loop {
        let v = eval(wb)?;
        if let Some(s) = v.sign() {
            return Ok(Some(s));
        }
        if v.is_point() {
            return Ok(Some(0));
        }
        if wb >= max_bits {
            return Ok(None);
        }
        wb = (wb * 2).min(max_bits);
    }
}

/// Point bisection of `value(x) >= 0`-style crossings at the parameter
/// midpoint. `value` takes (x, work_bits) and returns an enclosure whose
/// sign decides the probe; escalation is internal. The crossing must be
/// `negative at lo, nonnegative at hi` (caller pre-orients).
pub(crate) fn point_bisect(
    mut value: impl FnMut(&DyadicRational, u64) -> Result<DyadicInterval, NumericsError>,
    lo0: &DyadicRational,
    hi0: &DyadicRational,
    depth_bits: u64,
    start_bits: u64,
    max_bits: u64,
) -> Result<DyadicInterval, DynamicsError> {
    let mut lo = lo0.clone();
    let mut hi = hi0.clone();
    let target = DyadicRational::pow2(-(depth_bits as i64));
    while hi.sub(&lo) > target {
        let mid = lo.midpoint(&hi);
        let s = escalating_sign(|wb| value(&mid, wb), start_bits, max_bits)?
            .ok_or(DynamicsError::PrecisionExhausted)?;
        if s < 0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(DyadicInterval::new(lo, hi))
}

fn pow2(e: i64) -> DyadicRational {
    DyadicRational::pow2(e)
}

fn half() -> DyadicRational {
    DyadicRational::from_parts(1, 1)
}

/// `g(x) - x` over the parameter box at a point `x`.
fn stage_gap(
    a: &DyadicInterval,
    x: &DyadicRational,
    wb: u64,
) -> Result<DyadicInterval, NumericsError> {
    Ok(g_box(a, &DyadicInterval::point(x.clone()), wb)?.sub(&DyadicInterval::point(x.clone())))
}

/// Solve the stage geometry over the (refined) parameter interval.
pub fn solve_stage(a: &mut LazyParameter, bits: u64) -> Result<StageGeometry, DynamicsError> {
    let mut guard = 12u64;
    let mut last_err = DynamicsError::BranchLost;
    for _ in 0..4 {
        a.refine(bits + guard)?;
        match solve_stage_at(a.current(), bits, guard) {
            Ok(st) => return Ok(st),
            Err(e @ DynamicsError::PrecisionExhausted) | Err(e @ DynamicsError::BranchLost) => {
                last_err = e;
                guard += 16;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err)
}

/// Stage solve for a fixed parameter interval (no refinement).
pub fn solve_stage_at(
    a_iv: &DyadicInterval,
    bits: u64,
    guard: u64,
) -> Result<StageGeometry, DynamicsError> {
    let a_mid = DyadicInterval::point(a_iv.midpoint());
    let depth = bits + guard;
    let wb0 = 2 * depth + 64;
    let wb_max = wb0 * 8;

    // --- beta: first crossing of g(x) - x on (1/2, 1) ---
    let grid = 64i64;
    let mut cell = None;
    let mut prev: Option<(DyadicRational, i32)> = None;
    for i in (grid / 2 + 1)..grid {
        let x = DyadicRational::from_parts(i, 6);
        let s = escalating_sign(|wb| stage_gap(&a_mid, &x, wb), wb0, wb_max)?
            .ok_or(DynamicsError::PrecisionExhausted)?;
        if let Some((px, ps)) = &prev {
            if *ps < 0 && s >= 0 {
                cell = Some((px.clone(), x.clone()));
                break;
            }
        }
        prev = Some((x, s));
    }
    let (clo, chi) = cell.ok_or(DynamicsError::BranchLost)?;
    let beta_pt =
        point_bisect(|x, wb| stage_gap(&a_mid, x, wb), &clo, &chi, depth, wb0, wb_max)?;

    // certify over the full parameter interval
    let beta = certify_root(
        a_iv,
        |a, x, wb| stage_gap(a, x, wb),
        &beta_pt.midpoint(),
        bits,
        wb0,
        wb_max,
        /*falling=*/ false,
    )?;

    let one = DyadicInterval::point(DyadicRational::one());
    let beta_prime = one.sub(&beta);

    // --- l: g(l) = beta' on (beta', 1/2) ---
    // Point-solve against the midpoint beta; certify through the composed
    // self-contained equation E(x) = g(x) + g^2(x) - 1, which vanishes at l
    // (g(l) = beta' and g(beta') = beta = 1 - beta') and rises through it.
    let beta_mid = beta_pt.midpoint();
    let l_pt = point_bisect(
        |x, wb| {
            // g - beta~' is positive at beta' and negative at 1/2; negate
            let v = g_box(&a_mid, &DyadicInterval::point(x.clone()), wb)?
                .sub(&DyadicInterval::point(DyadicRational::one().sub(&beta_mid)));
            Ok(v.neg())
        },
        &DyadicRational::one().sub(&beta_mid),
        &half(),
        depth,
        wb0,
        wb_max,
    )?;
    let composed = |a: &DyadicInterval, x: &DyadicRational, wb: u64| {
        let g1 = g_box(a, &DyadicInterval::point(x.clone()), wb)?;
        let g2 = g_box(a, &g1, wb)?;
        Ok(g1.add(&g2).sub(&DyadicInterval::point(DyadicRational::one())))
    };
    let l = certify_root(a_iv, composed, &l_pt.midpoint(), bits, wb0, wb_max, /*falling=*/ false)?;
    // tie the certified root to the branch equation g(l) ~ beta'
    let g_l = g_box(a_iv, &l, wb0)?;
    if !beta_prime.inflate(&pow2(-(bits as i64) + 4)).contains_interval(&g_l) {
        return Err(DynamicsError::BranchLost);
    }
    let r = one.sub(&l);

    // --- ordering certificates ---
    let half_iv = DyadicInterval::point(half());
    if !(beta_prime.strictly_below(&l)
        && l.strictly_below(&half_iv)
        && half_iv.strictly_below(&r)
        && r.strictly_below(&beta))
    {
        return Err(DynamicsError::BranchLost);
    }

    // --- g(0.5) < beta' certified ---
    let g_half = g_box(a_iv, &half_iv, wb0)?;
    if !(g_half.hi() < beta_prime.lo()) {
        return Err(DynamicsError::BranchLost);
    }

    // --- residual certificate |g(beta) - beta| < 2^{-bits+4} ---
    let resid = g_box(a_iv, &beta, wb0)?.sub(&beta);
    if resid.abs_upper() >= pow2(-(bits as i64) + 4) {
        return Err(DynamicsError::PrecisionExhausted);
    }

    // --- monotone branches: certified derivative signs ---
    let l_hull = DyadicInterval::new(beta_prime.lo().clone(), l.hi().clone());
    let r_hull = DyadicInterval::new(r.lo().clone(), beta.hi().clone());
    if !branch_derivative_sign(a_iv, &l_hull, -1, wb0)? || !branch_derivative_sign(a_iv, &r_hull, 1, wb0)? {
        return Err(DynamicsError::BranchLost);
    }

    // --- right extension: certified monotone continuation past beta ---
    let t_pt = point_bisect(
        |x, wb| {
            iterate_enclosure(&a_mid, &DyadicInterval::point(x.clone()), 2, wb)
                .map(|v| v.sub(&half_iv))
        },
        beta.hi(),
        &DyadicRational::from_parts(27, 5), // 0.84375
        16,
        wb0,
        wb_max,
    )?;
    // back off and certify: f(t) > 1/2 and f^2(t) < 1/2 for all a in the box
    let t_safe = t_pt.lo().sub(&pow2(-8));
    let t_iv = DyadicInterval::point(t_safe.clone());
    let f_t = iterate_enclosure(a_iv, &t_iv, 1, wb0)?;
    let f2_t = iterate_enclosure(a_iv, &t_iv, 2, wb0)?;
    if !(f_t.lo() > &half() && f2_t.hi() < &half() && &t_safe > beta.hi()) {
        return Err(DynamicsError::BranchLost);
    }

    Ok(StageGeometry {
        a: a_iv.clone(),
        beta,
        beta_prime,
        l,
        r,
        right_extension: t_safe,
        bits,
    })
}

/// Fatten a point root and certify a sign change of `value` at the
/// endpoints over the whole parameter interval. `falling`: the value goes
/// `+ -> -` through the root.
fn certify_root(
    a_iv: &DyadicInterval,
    mut value: impl FnMut(&DyadicInterval, &DyadicRational, u64) -> Result<DyadicInterval, NumericsError>,
    root: &DyadicRational,
    bits: u64,
    wb0: u64,
    wb_max: u64,
    falling: bool,
) -> Result<DyadicInterval, DynamicsError> {
    let fat = pow2(-(bits as i64) - 2);
    let lo = root.sub(&fat);
    let hi = root.add(&fat);
    let want_lo = if falling { 1 } else { -1 };
    let s_lo = escalating_sign(|wb| value(a_iv, &lo, wb), wb0, wb_max)?;
    let s_hi = escalating_sign(|wb| value(a_iv, &hi, wb), wb0, wb_max)?;
    if s_lo == Some(want_lo) && s_hi == Some(-want_lo) {
        Ok(DyadicInterval::new(lo, hi))
    } else {
        Err(DynamicsError::PrecisionExhausted)
    }
}

/// Certified constant derivative sign of `g` on a subinterval, by adaptive
/// bisection of the interval.
fn branch_derivative_sign(
    a_iv: &DyadicInterval,
    x: &DyadicInterval,
    want: i32,
    wb: u64,
) -> Result<bool, DynamicsError> {
    let mut stack = vec![(x.clone(), 0u32)];
    while let Some((seg, depth)) = stack.pop() {
        let d = g_derivative_box(a_iv, &seg, wb)?;
        match d.sign() {
            Some(s) if s == want => continue,
            _ => {
                if depth >= 24 {
                    return Ok(false);
                }
                let mid = seg.midpoint();
                stack.push((DyadicInterval::new(seg.lo().clone(), mid.clone()), depth + 1));
                stack.push((DyadicInterval::new(mid, seg.hi().clone()), depth + 1));
            }
        }
    }
    Ok(true)
}

/// `g'(x) = f'(f^2 x) f'(f x) f'(x)` over boxes.
pub fn g_derivative_box(
    a: &DyadicInterval,
    x: &DyadicInterval,
    wb: u64,
) -> Result<DyadicInterval, NumericsError> {
    let x1 = iterate_enclosure(a, x, 1, wb)?;
    let x2 = iterate_enclosure(a, &x1, 1, wb)?;
    let d0 = DyadicInterval::logistic_derivative(a, x);
    let d1 = DyadicInterval::logistic_derivative(a, &x1);
    let d2 = DyadicInterval::logistic_derivative(a, &x2);
    Ok(d0.mul(&d1).mul(&d2).round_out(wb))
}

/// Outer enclosure of the branch preimage `psi_letter(target)`: the unique
/// `y` in the (extended) monotone piece of the branch with `g(y) in
/// target`, valid for every parameter in the box.
///
/// `increasing = true` is the right branch (through `r .. beta ..
/// right_extension`), `false` the left.
pub fn solve_g_preimage(
    stage: &StageGeometry,
    target: &DyadicInterval,
    increasing: bool,
    depth_bits: u64,
) -> Result<DyadicInterval, DynamicsError> {
    solve_g_preimage_hinted(stage, target, increasing, depth_bits, None)
}

/// Which side of the true preimage the certified endpoints must lie on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreimageSide {
    /// The result contains the true preimage for every parameter.
    Outer,
    /// The result is contained in the true preimage for every parameter;
    /// the forward image then certifiably lands inside the target.
    Inner,
}

/// As [`solve_g_preimage`], but tries a local bracket first. Chains of
/// pullbacks pass the neighborhood of the previous window so each level
/// costs a handful of probes instead of a full-domain bisection.
pub fn solve_g_preimage_hinted(
    stage: &StageGeometry,
    target: &DyadicInterval,
    increasing: bool,
    depth_bits: u64,
    hint: Option<&DyadicInterval>,
) -> Result<DyadicInterval, DynamicsError> {
    solve_g_preimage_sided(stage, target, increasing, depth_bits, hint, PreimageSide::Outer)
}

pub fn solve_g_preimage_sided(
    stage: &StageGeometry,
    target: &DyadicInterval,
    increasing: bool,
    depth_bits: u64,
    hint: Option<&DyadicInterval>,
    side: PreimageSide,
) -> Result<DyadicInterval, DynamicsError> {
    let a_iv = &stage.a;
    let a_mid = DyadicInterval::point(a_iv.midpoint());
    let wb0 = 2 * depth_bits + 64;
    let wb_max = wb0 * 8;
    // search domain: the extended monotone piece
    let (dom_lo, dom_hi) = if increasing {
        (half().add(&pow2(-12)), stage.right_extension.clone())
    } else {
        (
            DyadicRational::one().sub(&stage.right_extension),
            half().sub(&pow2(-12)),
        )
    };

    let mut out_endpoints = Vec::with_capacity(2);
    for (t, low_side) in [(target.lo(), true), (target.hi(), false)] {
        // orient: value(y) = g(y) - t; increasing branch: - -> + over domain
        let val = |y: &DyadicRational, wb: u64| -> Result<DyadicInterval, NumericsError> {
            let v = g_box(&a_mid, &DyadicInterval::point(y.clone()), wb)?
                .sub(&DyadicInterval::point(t.clone()));
            Ok(if increasing { v } else { v.neg() })
        };
        // try the hint bracket, fall back to the whole domain
        let mut bracket: Option<(DyadicRational, DyadicRational)> = None;
        if let Some(h) = hint {
            let lo = h.lo().clone().max(dom_lo.clone());
            let hi = h.hi().clone().min(dom_hi.clone());
            if lo < hi {
                let s_lo = escalating_sign(|wb| val(&lo, wb), wb0, wb_max)?;
                let s_hi = escalating_sign(|wb| val(&hi, wb), wb0, wb_max)?;
                if s_lo == Some(-1) && s_hi == Some(1) {
                    bracket = Some((lo, hi));
                }
            }
        }
        let (blo, bhi) = bracket.unwrap_or((dom_lo.clone(), dom_hi.clone()));
        let pt = point_bisect(val, &blo, &bhi, depth_bits, wb0, wb_max)?;
        // directed certification: push the endpoint away from the located
        // root until the whole parameter box agrees it lies on the wanted
        // side of the preimage
        let mut offset = pt.width().max(pow2(-(depth_bits as i64) - 1));
        let cap = target.width().mul_pow2(6).max(pow2(-8));
        // whether this endpoint of the preimage is its smaller-y end
        let preimage_low = low_side == increasing;
        // outer pushes past the root, inner pulls across it
        let move_low = preimage_low == (side == PreimageSide::Outer);
        loop {
            let y = if move_low { pt.lo().sub(&offset) } else { pt.hi().add(&offset) };
            let v = g_box(a_iv, &DyadicInterval::point(y.clone()), wb_max)?;
            // e.g. the outer endpoint for the lower target value must map
            // certifiably below it; inner endpoints certify the reverse
            let want_below = low_side == (side == PreimageSide::Outer);
            let ok = if want_below { v.hi() < t } else { v.lo() > t };
            if ok {
                out_endpoints.push(y);
                break;
            }
            offset = offset.mul_pow2(1);
            if offset > cap {
                return Err(DynamicsError::PrecisionExhausted);
            }
        }
    }
    let (e0, e1) = (out_endpoints.remove(0), out_endpoints.remove(0));
    if side == PreimageSide::Inner {
        // inner endpoints pulled across each other mean the window is too
        // thin to certify at this parameter width
        let ordered = if increasing { e0 < e1 } else { e1 < e0 };
        if !ordered {
            return Err(DynamicsError::PrecisionExhausted);
        }
    }
    Ok(DyadicInterval::from_endpoints(e0, e1))
}

/// The tip parameter: the smallest `c` in (3.85, 4) where the critical
/// orbit satisfies `g(0.5) = 1 - g^2(0.5)` (hence `g^2(0.5) = g^3(0.5)`),
/// with the fold certificate.
pub fn find_tip_c(bits: u64) -> Result<DyadicInterval, DynamicsError> {
    // u(a) = f^3(0.5) + f^6(0.5) - 1, exact polynomial in a
    let u = |a: &DyadicRational, wb: u64| -> Result<DyadicInterval, NumericsError> {
        let a_iv = DyadicInterval::point(a.clone());
        let x = DyadicInterval::point(half());
        let v3 = iterate_enclosure(&a_iv, &x, 3, wb)?;
        let v6 = iterate_enclosure(&a_iv, &v3, 3, wb)?;
        Ok(v3.add(&v6).sub(&DyadicInterval::point(DyadicRational::one())))
    };
    let wb0 = 2 * bits + 128;
    let wb_max = wb0 * 8;
    let grid_bits = 10u64;
    let lo_edge = DyadicRational::from_parts(3943, 10); // 3.8506...
    let steps = ((DyadicRational::from_int(4).sub(&lo_edge)).to_f64() * 1024.0) as i64;

    let mut prev: Option<(DyadicRational, i32)> = None;
    for i in 0..=steps {
        let x = lo_edge.add(&DyadicRational::from_parts(i, grid_bits));
        if x >= DyadicRational::from_int(4) {
            break;
        }
        let s = escalating_sign(|wb| u(&x, wb), wb0, wb_max)?
            .ok_or(DynamicsError::PrecisionExhausted)?;
        if let Some((px, ps)) = &prev {
            if *ps != s && s != 0 {
                if let Some(c) = try_tip_cell(px, &x, *ps, bits, &u, wb0, wb_max)? {
                    return Ok(c);
                }
            }
        }
        prev = Some((x, s));
    }
    Err(DynamicsError::NotFound)
}

fn try_tip_cell(
    lo: &DyadicRational,
    hi: &DyadicRational,
    lo_sign: i32,
    bits: u64,
    u: &impl Fn(&DyadicRational, u64) -> Result<DyadicInterval, NumericsError>,
    wb0: u64,
    wb_max: u64,
) -> Result<Option<DyadicInterval>, DynamicsError> {
    // bisect u inside the cell; deepen until the defining residual
    // certificate holds as well
    let mut depth = bits + 8;
    for _ in 0..4 {
        let orient = |a: &DyadicRational, wb: u64| -> Result<DyadicInterval, NumericsError> {
            let v = u(a, wb)?;
            Ok(if lo_sign < 0 { v } else { v.neg() })
        };
        let c = point_bisect(orient, lo, hi, depth, wb0, wb_max)?;
        match certify_tip(&c, bits, wb_max) {
            Ok(true) => return Ok(Some(c)),
            Ok(false) => return Ok(None),
            Err(DynamicsError::PrecisionExhausted) => depth += bits / 2 + 16,
            Err(e) => return Err(e),
        }
    }
    Err(DynamicsError::PrecisionExhausted)
}

/// The fold + defining-residual certificates for a tip candidate.
/// `Ok(false)`: certifiably not a tip of the right shape (spurious root).
/// `PrecisionExhausted`: could not decide at this width.
fn certify_tip(c: &DyadicInterval, bits: u64, wb: u64) -> Result<bool, DynamicsError> {
    let x = DyadicInterval::point(half());
    let v3 = iterate_enclosure(c, &x, 3, wb)?; // g(0.5)
    let v6 = iterate_enclosure(c, &v3, 3, wb)?; // g^2(0.5) = beta-hat
    let v9 = iterate_enclosure(c, &v6, 3, wb)?; // g^3(0.5)

    // orientation: g(0.5) < 1/2 < g^2(0.5); also separates g(0.5) from
    // g^2(0.5)
    if !(v3.hi() < &half() && v6.lo() > &half()) {
        return Ok(false);
    }
    // fold certificate: on I = [1 - beta, beta] the only turning point of g
    // is 0.5 — certified via f(I) and f^2(I) avoiding 1/2
    let i_hull = DyadicInterval::new(
        DyadicRational::one().sub(v6.hi()),
        v6.hi().clone(),
    );
    let f_i = iterate_enclosure(c, &i_hull, 1, wb)?;
    if !(f_i.lo() > &half()) {
        return Ok(false);
    }
    let f2_i = iterate_enclosure(c, &f_i, 1, wb)?;
    if !(f2_i.hi() < &half()) {
        return Ok(false);
    }
    // defining residual |g^2(0.5) - g^3(0.5)| < 2^{-bits+4}
    let resid = v6.sub(&v9).abs_upper();
    if resid >= pow2(-(bits as i64) + 4) {
        return Err(DynamicsError::PrecisionExhausted);
    }
    if c.width() > pow2(-(bits as i64)) {
        return Err(DynamicsError::PrecisionExhausted);
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::LazyParameter;
    use num_rational::BigRational;

    fn param(p: i64, q: i64) -> LazyParameter {
        LazyParameter::from_rational(&BigRational::new(p.into(), q.into()))
    }

    #[test]
    fn stage_at_3_9() {
        let mut a = param(39, 10);
        let st = solve_stage(&mut a, 48).unwrap();
        // numerically known landmarks
        assert!(st.beta.contains(&DyadicRational::from_f64(0.5780972804878336).unwrap()));
        assert!(st.l.contains(&DyadicRational::from_f64(0.4555262720421827).unwrap()));
        assert!(st.r.contains(&DyadicRational::from_f64(0.5444737279578173).unwrap()));
        assert!(st.beta.width() <= DyadicRational::pow2(-48));
        // beta' is exactly 1 - beta
        assert_eq!(st.beta_prime.hi().add(st.beta.lo()), DyadicRational::one());
    }

    #[test]
    fn stage_at_4_matches_closed_form() {
        // beta_4 = sin^2(2 pi / 7)
        let mut a = param(4, 1);
        let st = solve_stage(&mut a, 50).unwrap();
        let closed = DyadicRational::from_f64(0.6112604669781572).unwrap();
        assert!(st.beta.inflate(&DyadicRational::pow2(-45)).contains(&closed));
    }

    #[test]
    fn preimage_solves_branch_equation() {
        let mut a = param(39, 10);
        let st = solve_stage(&mut a, 48).unwrap();
        // psi_1(beta) = beta
        let pre = solve_g_preimage(&st, &st.beta, true, 40).unwrap();
        assert!(pre.intersects(&st.beta));
        // psi_0(beta) = beta' (g(beta') = beta on the falling branch)
        let pre0 = solve_g_preimage(&st, &st.beta, false, 40).unwrap();
        assert!(pre0.intersects(&st.beta_prime.round_out(40)));
    }
}
