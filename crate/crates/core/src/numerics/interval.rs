//! Closed dyadic intervals with outward rounding.

use serde::{Deserialize, Serialize};

use super::dyadic::{DyadicRational, Rounding};

/// A closed interval `[lo, hi]` with exact dyadic endpoints.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DyadicInterval {
    lo: DyadicRational,
    hi: DyadicRational,
}

impl DyadicInterval {
    /// Panics if `lo > hi`; construction sites always know the order.
    pub fn new(lo: DyadicRational, hi: DyadicRational) -> Self {
        assert!(lo <= hi, "interval endpoints out of order");
        DyadicInterval { lo, hi }
    }

    pub fn point(x: DyadicRational) -> Self {
        DyadicInterval { lo: x.clone(), hi: x }
    }

    pub fn from_endpoints(a: DyadicRational, b: DyadicRational) -> Self {
        if a <= b { DyadicInterval { lo: a, hi: b } } else { DyadicInterval { lo: b, hi: a } }
    }

    pub fn lo(&self) -> &DyadicRational {
        &self.lo
    }

    pub fn hi(&self) -> &DyadicRational {
        &self.hi
    }

    pub fn width(&self) -> DyadicRational {
        self.hi.sub(&self.lo)
    }

    pub fn midpoint(&self) -> DyadicRational {
        self.lo.midpoint(&self.hi)
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, x: &DyadicRational) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub fn contains_interval(&self, other: &Self) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn intersects(&self, other: &Self) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn intersect(&self, other: &Self) -> Option<Self> {
        let lo = self.lo.clone().max(other.lo.clone());
        let hi = self.hi.clone().min(other.hi.clone());
        if lo <= hi { Some(DyadicInterval { lo, hi }) } else { None }
    }

    pub fn hull(&self, other: &Self) -> Self {
        DyadicInterval {
            lo: self.lo.clone().min(other.lo.clone()),
            hi: self.hi.clone().max(other.hi.clone()),
        }
    }

    /// Certified strict order: every point of `self` is below every point of
    /// `other`.
    pub fn strictly_below(&self, other: &Self) -> bool {
        self.hi < other.lo
    }

    pub fn add(&self, other: &Self) -> Self {
        DyadicInterval { lo: self.lo.add(&other.lo), hi: self.hi.add(&other.hi) }
    }

    pub fn sub(&self, other: &Self) -> Self {
        DyadicInterval { lo: self.lo.sub(&other.hi), hi: self.hi.sub(&other.lo) }
    }

    pub fn neg(&self) -> Self {
        DyadicInterval { lo: self.hi.neg(), hi: self.lo.neg() }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let c = [
            self.lo.mul(&other.lo),
            self.lo.mul(&other.hi),
            self.hi.mul(&other.lo),
            self.hi.mul(&other.hi),
        ];
        let mut lo = c[0].clone();
        let mut hi = c[0].clone();
        for v in &c[1..] {
            if v < &lo {
                lo = v.clone();
            }
            if v > &hi {
                hi = v.clone();
            }
        }
        DyadicInterval { lo, hi }
    }

    pub fn add_scalar(&self, x: &DyadicRational) -> Self {
        DyadicInterval { lo: self.lo.add(x), hi: self.hi.add(x) }
    }

    pub fn mul_scalar(&self, x: &DyadicRational) -> Self {
        if x.is_negative() {
            DyadicInterval { lo: self.hi.mul(x), hi: self.lo.mul(x) }
        } else {
            DyadicInterval { lo: self.lo.mul(x), hi: self.hi.mul(x) }
        }
    }

    /// Widen both endpoints by `r >= 0`.
    pub fn inflate(&self, r: &DyadicRational) -> Self {
        debug_assert!(!r.is_negative());
        DyadicInterval { lo: self.lo.sub(r), hi: self.hi.add(r) }
    }

    /// Round endpoints outward onto the grid `D_bits`.
    pub fn round_out(&self, bits: u64) -> Self {
        DyadicInterval {
            lo: self.lo.round_to_bits(bits, Rounding::Floor),
            hi: self.hi.round_to_bits(bits, Rounding::Ceil),
        }
    }

    /// Exact range of `t(1-t)` over this interval.
    pub fn quad_range(&self) -> Self {
        let half = DyadicRational::from_parts(1, 1);
        let q = |t: &DyadicRational| t.mul(&DyadicRational::one().sub(t));
        let qlo = q(&self.lo);
        let qhi = q(&self.hi);
        let lo = qlo.clone().min(qhi.clone());
        let hi = if self.lo <= half && half <= self.hi {
            DyadicRational::from_parts(1, 2)
        } else {
            qlo.max(qhi)
        };
        DyadicInterval { lo, hi }
    }

    /// Exact range of the logistic step `a x (1-x)` over boxes `a`, `x`.
    pub fn logistic_step(a: &Self, x: &Self) -> Self {
        a.mul(&x.quad_range())
    }

    /// Exact range of the derivative `a (1 - 2x)`.
    pub fn logistic_derivative(a: &Self, x: &Self) -> Self {
        let two = DyadicRational::from_int(2);
        let one_minus_2x = DyadicInterval::point(DyadicRational::one()).sub(&x.mul_scalar(&two));
        a.mul(&one_minus_2x)
    }

    /// Upper bound on `|x|` over the interval.
    pub fn abs_upper(&self) -> DyadicRational {
        self.lo.abs().max(self.hi.abs())
    }

    /// Certified sign: `Some(+1)` if the whole interval is positive, etc.
    pub fn sign(&self) -> Option<i32> {
        if self.lo.is_positive() {
            Some(1)
        } else if self.hi.is_negative() {
            Some(-1)
        } else if self.lo.is_zero() && self.hi.is_zero() {
            Some(0)
        } else {
            None
        }
    }
}

impl std::fmt::Debug for DyadicInterval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{} , {}] (w~{:.3e})", self.lo.to_f64(), self.hi.to_f64(), self.width().to_f64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(k: i64, m: u64) -> DyadicRational {
        DyadicRational::from_parts(k, m)
    }

    fn iv(a: (i64, u64), b: (i64, u64)) -> DyadicInterval {
        DyadicInterval::new(d(a.0, a.1), d(b.0, b.1))
    }

    #[test]
    fn mul_sign_cases() {
        let m = iv((-2, 0), (3, 0)).mul(&iv((4, 0), (5, 0)));
        assert_eq!(m, iv((-10, 0), (15, 0)));
        let n = iv((-3, 0), (-1, 0)).mul(&iv((2, 0), (4, 0)));
        assert_eq!(n, iv((-12, 0), (-2, 0)));
    }

    #[test]
    fn quad_range_covers_vertex() {
        // interval straddling 1/2 picks up the max 1/4
        let r = iv((1, 2), (3, 2)).quad_range();
        assert_eq!(r.hi(), &d(1, 2));
        assert_eq!(r.lo(), &d(3, 4)); // q(3/4) = 3/16 = q(1/4)
        // monotone piece
        let r2 = iv((0, 0), (1, 2)).quad_range();
        assert_eq!(r2.lo(), &d(0, 0));
        assert_eq!(r2.hi(), &d(3, 4));
    }

    #[test]
    fn logistic_step_fixed_point() {
        // a = 2, x = 1/2 -> exactly 1/2
        let a = DyadicInterval::point(d(2, 0));
        let x = DyadicInterval::point(d(1, 1));
        let y = DyadicInterval::logistic_step(&a, &x);
        assert!(y.is_point());
        assert_eq!(y.lo(), &d(1, 1));
    }

    #[test]
    fn round_out_is_outward() {
        let x = iv((5, 3), (7, 3)); // [0.625, 0.875]
        let r = x.round_out(1);
        assert_eq!(r, iv((1, 1), (1, 0)));
        assert!(r.contains_interval(&x));
    }
}
