//! The tuning loop: iterated certified steering of the critical orbit
//! through pullback windows, followed by a superattracting closure.

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    lambda_measure, solve_periodic_orbit_at, solve_stage_at, PeriodicOrbit, StageGeometry,
};
use crate::measures::DiscreteMeasure;
use crate::numerics::{
    iterate_trajectory, DyadicInterval, DyadicRational, LazyParameter, Rounding,
};
use crate::ratio;

use super::cache::TuneCache;
use super::schedule::{dwell_schedule, DwellEntry, OverheadModel, Schedule};
use super::steer::{narrow_with_recovery, recenter, CriticalOrbit, SteerState};
use super::windows::{build_anchor, build_levels_floored};
use super::{TargetProfile, TunerError};

/// Serializable description of one tuning job; doubles as the cache key.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuneRequest {
    pub version: String,
    pub bracket: DyadicInterval,
    pub profile: TargetProfile,
    pub frozen_bits: u64,
    /// Stage depth `l`: the pre-closure empirical match is pushed to scale
    /// `2^-l` and the orbit length grows accordingly.
    pub stage_bits: u64,
}

impl TuneRequest {
    pub fn new(bracket: DyadicInterval, profile: TargetProfile, frozen_bits: u64, stage_bits: u64) -> Self {
        TuneRequest { version: "tune-v1".into(), bracket, profile, frozen_bits, stage_bits }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MassReport {
    pub orbit_index: u64,
    #[serde(with = "ratio::pq_string")]
    pub target_weight: BigRational,
    #[serde(with = "ratio::pq_string")]
    pub achieved_mass: BigRational,
    pub radius: DyadicRational,
    pub in_profile: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExecutedDwell {
    pub orbit_index: u64,
    pub revolutions: u64,
    pub entry_time: u64,
}

/// A tuned parameter: the superattracting closure, its sink measure, and
/// every residual needed to audit the construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TunedParameter {
    pub request: TuneRequest,
    pub a_star: DyadicInterval,
    /// `m`: the critical point returns to itself after `m + 1` steps.
    pub stage_length: u64,
    /// Lazily refinable view of the parameter (continued closure
    /// bisection), carrying the oracle protocol.
    pub param: LazyParameter,
    pub achieved: DiscreteMeasure,
    /// Exact W1 distance to the requested combination of orbit measures.
    #[serde(with = "ratio::pq_string")]
    pub residual: BigRational,
    /// log2 of the certified closure residual `|f^{m+1}(1/2) - 1/2|`.
    pub closure_residual_log2: i64,
    pub mass_reports: Vec<MassReport>,
    pub executed: Vec<ExecutedDwell>,
    pub schedule: Schedule,
    /// Mass radius used by every report.
    pub radius: DyadicRational,
}

struct TuneState {
    steer: SteerState,
    executed: Vec<ExecutedDwell>,
}

const STAGE_GUARD: u64 = 16;

fn pow2(e: i64) -> DyadicRational {
    DyadicRational::pow2(e)
}

fn width_log2(iv: &DyadicInterval) -> i64 {
    let w = iv.width();
    if w.is_zero() {
        return -(1 << 20);
    }
    w.num_bits() as i64 - w.exponent() as i64
}

/// Solve a stage valid over `bracket` at the deepest certifiable bits.
fn stage_for(bracket: &DyadicInterval, want_bits: u64) -> Result<StageGeometry, TunerError> {
    let cell_limit = (-width_log2(bracket) - 12).max(24) as u64;
    let bits = want_bits.min(cell_limit);
    Ok(solve_stage_at(bracket, bits, STAGE_GUARD)?)
}

pub fn tune(request: &TuneRequest, cache: &TuneCache) -> Result<TunedParameter, TunerError> {
    if let Some(hit) = cache.get(request)? {
        return Ok(hit);
    }
    let out = tune_uncached(request)?;
    cache.put(request, &out)?;
    Ok(out)
}

fn tune_uncached(request: &TuneRequest) -> Result<TunedParameter, TunerError> {
    let bracket0 = &request.bracket;
    // the bracket must clear the tip parameter and stay inside (c, 4)
    let floor = ratio::rat(3857, 1000);
    let four = ratio::rat(4, 1);
    if bracket0.lo().to_rational() < floor || bracket0.hi().to_rational() >= four {
        return Err(TunerError::BadBracket);
    }
    if request.frozen_bits > 0 && !same_dyadic_cell(bracket0, request.frozen_bits) {
        return Err(TunerError::FrozenCellViolated(request.frozen_bits));
    }

    // phase 0: shrink to a working cell around the midpoint — any sub-cell
    // realizes the same frozen prefix
    let mid = bracket0.midpoint();
    let cell = DyadicInterval::new(mid.sub(&pow2(-53)), mid.add(&pow2(-53)))
        .intersect(bracket0)
        .ok_or(TunerError::BadBracket)?;

    // shallow stage: valid over the cell, used for orbits, radii, planning
    let stage = stage_for(&cell, 40)?;
    let orbit_bits = 36u64;
    let mut orbits: Vec<(u64, PeriodicOrbit)> = Vec::new();
    for e in &request.profile.entries {
        orbits.push((e.orbit_index, solve_periodic_orbit_at(&stage, e.orbit_index, orbit_bits)?));
    }

    // mass radius: a quarter of the smallest separation among scheduled
    // orbit points (capped)
    let radius = mass_radius(&orbits)?;

    // overhead model and schedule
    let model = OverheadModel {
        steps_per_revolution: orbits.iter().map(|(i, o)| (*i, 3 * o.word.g_period() as u64)).collect(),
        overhead_per_visit: orbits
            .iter()
            .map(|(i, o)| (*i, 3 * o.word.g_period() as u64 * 8 + 24))
            .collect(),
        travel: 18,
    };
    let schedule = dwell_schedule(&request.profile, request.stage_bits, &model)?;

    let projected_total = schedule.projected_total;
    let full_prec = 2 * projected_total + (-width_log2(&cell)).max(0) as u64 + 768;
    let _ = projected_total;
    let mut state =
        TuneState { steer: SteerState::new(cell.clone(), full_prec), executed: Vec::new() };

    // main dwell pass
    for entry in &schedule.entries {
        execute_dwell(&mut state, entry, &orbits, &radius)?;
    }

    // correction passes: measure realized near-steps, top up deficits
    for _ in 0..4 {
        let counts = certified_near_counts(&state, &orbits, &radius)?;
        let corrections =
            plan_corrections(&request.profile, &counts, state.steer.model.t, &model, &radius)?;
        if corrections.is_empty() {
            break;
        }
        for entry in &corrections {
            execute_dwell(&mut state, entry, &orbits, &radius)?;
        }
    }

    // closure ------------------------------------------------------------
    let closure = close_superattracting(&mut state)?;
    let m_plus_1 = closure.period;
    let a_star = closure.bracket.clone();

    // achieved sink measure from a certified full-orbit enclosure pass
    let wb = 2 * m_plus_1 + 320;
    let traj = iterate_trajectory(
        &a_star,
        &DyadicInterval::point(DyadicRational::from_parts(1, 1)),
        m_plus_1 - 1,
        wb,
    )?;
    let (achieved, max_width) =
        crate::measures::empirical::measure_from_enclosures(&traj, "sink-cycle-v1", wb)
            .map_err(TunerError::from)?;
    if max_width > radius.halve() {
        return Err(TunerError::Accounting("cycle enclosures wider than the mass radius".into()));
    }

    // residual against the requested combination
    let stage_star = stage_for(&a_star, 48).or_else(|_| stage_for(&cell, 40))?;
    let mut combo_pairs = Vec::new();
    let mut mass_reports = Vec::new();
    let max_profile_index = request.profile.entries.iter().map(|e| e.orbit_index).max().unwrap();
    for e in &request.profile.entries {
        let orb = solve_periodic_orbit_at(&stage_star, e.orbit_index, orbit_bits)?;
        let lam = lambda_measure(&orb)?;
        for atom in lam.atoms() {
            combo_pairs.push((atom.x.clone(), atom.w.clone() * &e.weight));
        }
        let mass = achieved.mass_near(&orb.f_points, &radius);
        let in_tolerance = (&mass - &e.weight).abs() <= request.profile.mass_tolerance;
        if Some(e.orbit_index) != request.profile.tail_index && !in_tolerance {
            return Err(TunerError::Accounting(format!(
                "orbit {} realized mass {} vs weight {}",
                e.orbit_index,
                ratio::to_pq(&mass),
                ratio::to_pq(&e.weight)
            )));
        }
        mass_reports.push(MassReport {
            orbit_index: e.orbit_index,
            target_weight: e.weight.clone(),
            achieved_mass: mass,
            radius: radius.clone(),
            in_profile: true,
        });
    }
    // nearby orbits outside the profile, reported with zero target
    for j in 1..=(2 * max_profile_index).max(6) {
        if request.profile.entries.iter().any(|e| e.orbit_index == j) {
            continue;
        }
        let orb = solve_periodic_orbit_at(&stage_star, j, orbit_bits)?;
        let mass = achieved.mass_near(&orb.f_points, &radius);
        mass_reports.push(MassReport {
            orbit_index: j,
            target_weight: BigRational::zero(),
            achieved_mass: mass,
            radius: radius.clone(),
            in_profile: false,
        });
    }
    let combo = DiscreteMeasure::new(combo_pairs).map_err(TunerError::from)?;
    let residual = achieved.w1(&combo);
    if residual > request.profile.tolerance {
        return Err(TunerError::ResidualTooLarge {
            residual: ratio::to_pq(&residual),
            tolerance: ratio::to_pq(&request.profile.tolerance),
        });
    }

    let param = LazyParameter::superattracting(a_star.clone(), m_plus_1, closure.lo_below);

    Ok(TunedParameter {
        request: request.clone(),
        a_star,
        stage_length: m_plus_1 - 1,
        param,
        achieved,
        residual,
        closure_residual_log2: closure.residual_log2,
        mass_reports,
        executed: state.executed,
        schedule,
        radius,
    })
}

fn same_dyadic_cell(iv: &DyadicInterval, bits: u64) -> bool {
    let scale = ratio::pow2(bits as i64);
    let lo = (iv.lo().to_rational() * &scale).floor();
    let hi = (iv.hi().to_rational() * &scale).floor();
    lo == hi
}

fn mass_radius(orbits: &[(u64, PeriodicOrbit)]) -> Result<DyadicRational, TunerError> {
    let mut all: Vec<DyadicInterval> = Vec::new();
    for (_, o) in orbits {
        all.extend(o.f_points.iter().cloned());
    }
    all.sort_by(|a, b| a.lo().cmp(b.lo()));
    let mut r = pow2(-8);
    for w in all.windows(2) {
        if w[1].lo() <= w[0].hi() {
            return Err(TunerError::Accounting("scheduled orbit points overlap".into()));
        }
        let gap = w[1].lo().sub(w[0].hi());
        let quarter = gap.mul_pow2(-2);
        if quarter < r {
            r = quarter;
        }
    }
    if r <= pow2(-40) {
        return Err(TunerError::Accounting("mass radius collapsed".into()));
    }
    Ok(r.round_to_bits(40, Rounding::Floor))
}

/// Steer into the dwell window for `entry`, then ride the chain down.
fn execute_dwell(
    state: &mut TuneState,
    entry: &DwellEntry,
    orbits: &[(u64, PeriodicOrbit)],
    radius: &DyadicRational,
) -> Result<(), TunerError> {
    let orbit = &orbits.iter().find(|(i, _)| *i == entry.orbit_index).unwrap().1;
    let k = orbit.word.g_period() as u64;
    let want_levels = (entry.revolutions * k + 2).max(k);

    // iterated deepening: build as much chain as the current bracket
    // supports, narrow onto its deepest level, re-center, repeat
    let mut entered_at: Option<u64> = None;
    for _round in 0..96 {
        let depth_bits = (-width_log2(&state.steer.bracket)).max(0) as u64;
        let stage = stage_for(&state.steer.bracket, 48)?;
        let anchor = build_anchor(&stage, entry.orbit_index, (stage.bits - 8).min(32))?;
        // how many levels before window width hits the certification floor
        let floor_width = state.steer.bracket.width().mul_pow2(8);
        let levels =
            build_levels_floored(&stage, &anchor, want_levels, depth_bits + 64, Some(&floor_width))?;
        let deepest = levels.len() as u64 - 1;
        // the certified sweep saturates around 2^-6 of phase space; only
        // windows meaningfully below that are reliable targets
        let narrow_enough = levels.last().unwrap().width() <= pow2(-9);
        if !narrow_enough && deepest < want_levels {
            return Err(TunerError::WindowCollapse { t: state.steer.model.t });
        }
        let target = levels.last().unwrap().clone();
        narrow_with_recovery(&mut state.steer, &target)?;
        if deepest >= want_levels {
            entered_at = Some(state.steer.model.t);
            // ride the chain down with health checks
            ride_dwell(state, &levels, radius, orbit)?;
            break;
        }
    }
    let entry_time = entered_at.ok_or(TunerError::WindowCollapse { t: state.steer.model.t })?;
    state.executed.push(ExecutedDwell {
        orbit_index: entry.orbit_index,
        revolutions: entry.revolutions,
        entry_time,
    });
    Ok(())
}


/// Step through the forced dwell, checking the hull against the chain.
fn ride_dwell(
    state: &mut TuneState,
    levels: &[DyadicInterval],
    _radius: &DyadicRational,
    orbit: &PeriodicOrbit,
) -> Result<(), TunerError> {
    let k = orbit.word.g_period() as u64;
    let total_g = levels.len() as u64 - 1;
    for j in (0..total_g).rev() {
        for _ in 0..3 {
            state.steer.model.step();
        }
        // health check: the hull must sit inside (a small inflation of) the
        // expected level
        if j % k == 0 {
            let expect = &levels[j as usize];
            let slack = expect.width().add(&state.steer.model.e.mul_pow2(1));
            if !expect.inflate(&slack).contains_interval(&state.steer.model.hull()) {
                return Err(TunerError::WindowCollapse { t: state.steer.model.t });
            }
        }
    }
    Ok(())
}

/// A certified (min) count of near-steps per orbit from a fresh
/// full-precision replay of the current bracket.
fn certified_near_counts(
    state: &TuneState,
    orbits: &[(u64, PeriodicOrbit)],
    radius: &DyadicRational,
) -> Result<Vec<(u64, u64)>, TunerError> {
    let t_end = state.steer.model.t;
    let mut model = CriticalOrbit::new(&state.steer.bracket, state.steer.full_prec);
    let mut counts: Vec<(u64, u64)> = orbits.iter().map(|(i, _)| (*i, 0u64)).collect();
    let shrunk = radius.sub(&pow2(-36));
    for _ in 0..t_end {
        model.step();
        let hull = model.hull();
        for (idx, orb) in orbits {
            let near = orb.f_points.iter().any(|p| {
                let region = p.inflate(&shrunk);
                region.contains_interval(&hull)
            });
            if near {
                if let Some(c) = counts.iter_mut().find(|(i, _)| i == idx) {
                    c.1 += 1;
                }
                break;
            }
        }
    }
    Ok(counts)
}

fn plan_corrections(
    profile: &TargetProfile,
    counts: &[(u64, u64)],
    t_now: u64,
    model: &OverheadModel,
    _radius: &DyadicRational,
) -> Result<Vec<DwellEntry>, TunerError> {
    // fractions are judged against the projected final total; closure adds
    // a couple of steps which the margins absorb
    let mut entries = Vec::new();
    let mut extra_steps = 0u64;
    for e in &profile.entries {
        if Some(e.orbit_index) == profile.tail_index {
            continue;
        }
        let n = counts.iter().find(|(i, _)| *i == e.orbit_index).map(|(_, n)| *n).unwrap_or(0);
        // want |(n + x) / (t_now + x + oh) - w| small; solve for x >= 0
        let w = &e.weight;
        let total = BigRational::from_integer((t_now + extra_steps).into());
        let n_r = BigRational::from_integer(n.into());
        let deficit = w * &total - &n_r;
        let one_minus_w = BigRational::from_integer(1.into()) - w;
        if deficit.is_positive() {
            // x = deficit / (1 - w), padded by the visit overhead share
            let x = &deficit / &one_minus_w;
            let rev_steps = model
                .steps_per_revolution
                .iter()
                .find(|(o, _)| *o == e.orbit_index)
                .map(|(_, s)| *s)
                .unwrap_or(3);
            let steps = rational_ceil_u64(&x);
            let quarter = &profile.mass_tolerance * &total / BigRational::from_integer(4.into());
            if BigRational::from_integer(steps.into()) < quarter {
                continue; // already within a quarter tolerance
            }
            let revs = steps.div_ceil(rev_steps).max(1);
            extra_steps += revs * rev_steps
                + model
                    .overhead_per_visit
                    .iter()
                    .find(|(o, _)| *o == e.orbit_index)
                    .map(|(_, s)| *s)
                    .unwrap_or(48);
            entries.push(DwellEntry {
                orbit_index: e.orbit_index,
                revolutions: revs,
                planned_near_steps: revs * rev_steps,
            });
        }
    }
    Ok(entries)
}

fn rational_ceil_u64(r: &BigRational) -> u64 {
    let c = r.ceil().to_integer();
    let digits = c.to_u64_digits().1;
    digits.first().copied().unwrap_or(0)
}

struct Closure {
    bracket: DyadicInterval,
    period: u64,
    residual_log2: i64,
    lo_below: bool,
}

/// Steer the orbit onto the critical point and certify the root.
fn close_superattracting(state: &mut TuneState) -> Result<Closure, TunerError> {
    // target window inside the escape gap around 1/2
    let stage = stage_for(&state.steer.bracket, 40)?;
    let gap_lo = stage.l.hi().clone();
    let gap_hi = stage.r.lo().clone();
    let eta = gap_hi
        .sub(&gap_lo)
        .mul_pow2(-3)
        .min(pow2(-12));
    let half = DyadicRational::from_parts(1, 1);
    let target = DyadicInterval::new(half.sub(&eta), half.add(&eta));
    narrow_with_recovery(&mut state.steer, &target)?;
    let period = state.steer.model.t;

    // Newton on x_t(a) - 1/2 using the model derivative
    let res_target_bits: u64 = 192;
    let prec = (14 * period) / 10 + res_target_bits + 192;
    let mut a_cur = state.steer.bracket.midpoint();
    let mut last: Option<CriticalOrbit> = None;
    for _ in 0..40 {
        let m = recenter(&DyadicInterval::point(a_cur.clone()), period, prec);
        let res = m.c.sub(&half);
        if res.abs() < pow2(-(res_target_bits as i64)).add(&m.e) && m.e < pow2(-(res_target_bits as i64)) {
            last = Some(m);
            break;
        }
        let step = res.to_rational() / m.d.to_rational();
        let a_next = super::steer::dyadic_floor(
            &(a_cur.to_rational() - step),
            prec + 64,
        );
        // stay inside the surviving bracket
        if !state.steer.bracket.contains(&a_next) {
            return Err(TunerError::WindowCollapse { t: period });
        }
        a_cur = a_next;
        last = Some(m);
    }
    let m = last.ok_or(TunerError::WindowCollapse { t: period })?;
    if m.e >= pow2(-(res_target_bits as i64)) {
        return Err(TunerError::RemainderDominates { t: period });
    }

    // certified sign-change bracket around the root
    let d_abs = m.d.abs();
    if d_abs.is_zero() {
        return Err(TunerError::NonMonotoneKneading { t: period });
    }
    let eps = super::steer::dyadic_ceil(
        &(pow2(-(res_target_bits as i64) + 3).to_rational() / d_abs.to_rational()),
        prec + 64,
    );
    let lo = a_cur.sub(&eps);
    let hi = a_cur.add(&eps);
    let v_lo = recenter(&DyadicInterval::point(lo.clone()), period, prec);
    let v_hi = recenter(&DyadicInterval::point(hi.clone()), period, prec);
    let s_lo = certified_sign(&v_lo, &half)?;
    let s_hi = certified_sign(&v_hi, &half)?;
    if s_lo == s_hi {
        return Err(TunerError::NonMonotoneKneading { t: period });
    }
    let bracket = DyadicInterval::new(lo, hi);
    // certified residual over the final bracket
    let residual = v_lo
        .c
        .sub(&half)
        .abs()
        .max(v_hi.c.sub(&half).abs())
        .add(&v_lo.e)
        .add(&v_hi.e);
    let residual_log2 = if residual.is_zero() {
        -(res_target_bits as i64)
    } else {
        residual.num_bits() as i64 - residual.exponent() as i64
    };
    Ok(Closure { bracket, period, residual_log2, lo_below: s_lo < 0 })
}

fn certified_sign(m: &CriticalOrbit, half: &DyadicRational) -> Result<i32, TunerError> {
    let v = m.c.sub(half);
    if v.abs() <= m.e {
        return Err(TunerError::RemainderDominates { t: m.t });
    }
    Ok(if v.is_negative() { -1 } else { 1 })
}
