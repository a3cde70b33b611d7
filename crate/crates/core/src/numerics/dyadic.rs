//! Exact dyadic rational arithmetic.
//!
//! A dyadic rational is `num / 2^exp` with an arbitrary-precision integer
//! numerator. Addition, subtraction and multiplication are exact; there is
//! no general division. Directed rounding onto the grid `D_m` (denominator
//! `2^m`) is the only lossy operation, and the caller always picks the
//! direction.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

/// Rounding directions for [`DyadicRational::round_to_bits`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rounding {
    Floor,
    Ceil,
    /// Round to nearest grid point, ties away from zero. Deterministic.
    Nearest,
}

/// An exactly representable number `num / 2^exp`.
///
/// Canonical form: `num` is odd, or `exp == 0`. Zero is `0 / 2^0`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct DyadicRational {
    num: BigInt,
    exp: u64,
}

impl DyadicRational {
    pub fn new(num: BigInt, exp: u64) -> Self {
        let mut d = DyadicRational { num, exp };
        d.canonicalize();
        d
    }

    fn canonicalize(&mut self) {
        if self.num.is_zero() {
            self.exp = 0;
            return;
        }
        let tz = self.num.trailing_zeros().unwrap_or(0);
        let shift = tz.min(self.exp);
        if shift > 0 {
            self.num >>= shift;
            self.exp -= shift;
        }
    }

    pub fn zero() -> Self {
        DyadicRational { num: BigInt::zero(), exp: 0 }
    }

    pub fn one() -> Self {
        DyadicRational { num: BigInt::one(), exp: 0 }
    }

    pub fn from_int(v: i64) -> Self {
        DyadicRational { num: BigInt::from(v), exp: 0 }
    }

    /// `k / 2^m`, canonicalized.
    pub fn from_parts(k: i64, m: u64) -> Self {
        DyadicRational::new(BigInt::from(k), m)
    }

    /// Exact conversion: every finite `f64` is a dyadic rational.
    pub fn from_f64(v: f64) -> Option<Self> {
        if !v.is_finite() {
            return None;
        }
        if v == 0.0 {
            return Some(Self::zero());
        }
        let bits = v.to_bits();
        let sign = if bits >> 63 == 1 { -1i64 } else { 1 };
        let biased = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (mantissa, e) = if biased == 0 {
            (frac, -1074i64)
        } else {
            (frac | (1 << 52), biased - 1075)
        };
        let num = BigInt::from(sign) * BigInt::from(mantissa);
        Some(if e >= 0 {
            DyadicRational::new(num << e as u64, 0)
        } else {
            DyadicRational::new(num, (-e) as u64)
        })
    }

    /// Exact conversion when the denominator is a power of two.
    pub fn from_rational(r: &BigRational) -> Option<Self> {
        let den = r.denom();
        if den.is_zero() || den.sign() == Sign::Minus {
            return None;
        }
        let bits = den.bits();
        // power of two <=> exactly one set bit
        if den != &(BigInt::one() << (bits - 1)) {
            return None;
        }
        Some(DyadicRational::new(r.numer().clone(), bits - 1))
    }

    pub fn to_rational(&self) -> BigRational {
        BigRational::new(self.num.clone(), BigInt::one() << self.exp)
    }

    /// Approximate value; fine for diagnostics, never for certified results.
    pub fn to_f64(&self) -> f64 {
        if self.num.is_zero() {
            return 0.0;
        }
        let bits = self.num.bits();
        if bits <= 1022 && self.exp <= 1022 {
            return self.num.to_f64().unwrap_or(f64::NAN) / 2f64.powi(self.exp as i32);
        }
        // scale down to avoid overflow in either direction
        let keep = 64u64;
        let drop = bits.saturating_sub(keep);
        let head = (&self.num >> drop).to_f64().unwrap_or(f64::NAN);
        head * 2f64.powi(drop as i32 - self.exp.min(i32::MAX as u64) as i32)
    }

    pub fn numerator(&self) -> &BigInt {
        &self.num
    }

    pub fn exponent(&self) -> u64 {
        self.exp
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.num.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.num.is_positive()
    }

    pub fn abs(&self) -> Self {
        DyadicRational { num: self.num.abs(), exp: self.exp }
    }

    /// Multiply by `2^k` (exact).
    pub fn mul_pow2(&self, k: i64) -> Self {
        if self.num.is_zero() {
            return Self::zero();
        }
        if k >= 0 {
            let k = k as u64;
            if self.exp >= k {
                DyadicRational { num: self.num.clone(), exp: self.exp - k }
            } else {
                DyadicRational::new(&self.num << (k - self.exp), 0)
            }
        } else {
            DyadicRational::new(self.num.clone(), self.exp + (-k) as u64)
        }
    }

    /// `2^-m`.
    pub fn pow2(m: i64) -> Self {
        Self::one().mul_pow2(m)
    }

    pub fn halve(&self) -> Self {
        self.mul_pow2(-1)
    }

    /// Align two dyadics onto a common exponent and return the shifted
    /// numerators together with that exponent.
    fn aligned(&self, other: &Self) -> (BigInt, BigInt, u64) {
        let exp = self.exp.max(other.exp);
        let a = &self.num << (exp - self.exp);
        let b = &other.num << (exp - other.exp);
        (a, b, exp)
    }

    pub fn add(&self, other: &Self) -> Self {
        let (a, b, exp) = self.aligned(other);
        DyadicRational::new(a + b, exp)
    }

    pub fn sub(&self, other: &Self) -> Self {
        let (a, b, exp) = self.aligned(other);
        DyadicRational::new(a - b, exp)
    }

    pub fn neg(&self) -> Self {
        DyadicRational { num: -self.num.clone(), exp: self.exp }
    }

    pub fn mul(&self, other: &Self) -> Self {
        DyadicRational::new(&self.num * &other.num, self.exp + other.exp)
    }

    pub fn square(&self) -> Self {
        DyadicRational::new(&self.num * &self.num, 2 * self.exp)
    }

    /// Exact midpoint of two dyadics.
    pub fn midpoint(&self, other: &Self) -> Self {
        self.add(other).halve()
    }

    /// Round onto the grid `D_bits` (denominator `2^bits`) in the given
    /// direction. Exact when `exp <= bits`.
    pub fn round_to_bits(&self, bits: u64, dir: Rounding) -> Self {
        if self.exp <= bits {
            return self.clone();
        }
        let shift = self.exp - bits;
        let num = match dir {
            Rounding::Floor => self.num.div_floor(&(BigInt::one() << shift)),
            Rounding::Ceil => self.num.div_ceil(&(BigInt::one() << shift)),
            Rounding::Nearest => {
                let half = BigInt::one() << (shift - 1);
                let adj = if self.num.is_negative() { &self.num - half } else { &self.num + half };
                // ties away from zero
                if adj.is_negative() {
                    adj.div_ceil(&(BigInt::one() << shift))
                } else {
                    adj.div_floor(&(BigInt::one() << shift))
                }
            }
        };
        DyadicRational::new(num, bits)
    }

    /// Number of significant bits in the numerator (0 for zero).
    pub fn num_bits(&self) -> u64 {
        self.num.bits()
    }

    /// The integer `k` with `self = k / 2^m`, if `self` lies on that grid.
    pub fn grid_index(&self, m: u64) -> Option<BigInt> {
        if self.exp > m {
            return None;
        }
        Some(&self.num << (m - self.exp))
    }

    /// Parse a decimal string (e.g. `"3.25"`, `"-0.5"`) or a fraction
    /// `"p/q"`. Returns the exact rational; use [`Self::from_rational`] to
    /// demand dyadicity.
    pub fn parse_rational(s: &str) -> Option<BigRational> {
        let s = s.trim();
        if let Some((p, q)) = s.split_once('/') {
            let p = BigInt::from_str(p.trim()).ok()?;
            let q = BigInt::from_str(q.trim()).ok()?;
            if q.is_zero() {
                return None;
            }
            return Some(BigRational::new(p, q));
        }
        if let Some((int, frac)) = s.split_once('.') {
            let neg = int.trim_start().starts_with('-');
            let int_part = BigInt::from_str(if int.is_empty() || int == "-" { "0" } else { int }).ok()?;
            if frac.is_empty() {
                return Some(BigRational::from_integer(int_part));
            }
            let frac_digits = frac.len() as u32;
            let frac_num = BigInt::from_str(frac).ok()?;
            if frac_num.is_negative() {
                return None;
            }
            let den = BigInt::from(10u32).pow(frac_digits);
            let mag = int_part.abs() * &den + frac_num;
            let num = if neg { -mag } else { mag };
            return Some(BigRational::new(num, den));
        }
        let n = BigInt::from_str(s).ok()?;
        Some(BigRational::from_integer(n))
    }
}

impl PartialOrd for DyadicRational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for DyadicRational {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b, _) = self.aligned(other);
        a.cmp(&b)
    }
}

impl fmt::Debug for DyadicRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/2^{} (~{})", self.num, self.exp, self.to_f64())
    }
}

impl fmt::Display for DyadicRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exp == 0 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/2^{}", self.num, self.exp)
        }
    }
}

/// Wire form: `{"num": "<decimal>", "exp": n}`.
#[derive(Serialize, Deserialize)]
struct DyadicWire {
    num: String,
    exp: u64,
}

impl Serialize for DyadicRational {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        DyadicWire { num: self.num.to_string(), exp: self.exp }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DyadicRational {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = DyadicWire::deserialize(d)?;
        let num = BigInt::from_str(&w.num).map_err(serde::de::Error::custom)?;
        Ok(DyadicRational::new(num, w.exp))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(k: i64, m: u64) -> DyadicRational {
        DyadicRational::from_parts(k, m)
    }

    #[test]
    fn canonical_form() {
        let x = d(6, 3); // 6/8 = 3/4
        assert_eq!(x.numerator(), &BigInt::from(3));
        assert_eq!(x.exponent(), 2);
        let z = d(0, 17);
        assert_eq!(z.exponent(), 0);
        assert!(z.is_zero());
    }

    #[test]
    fn exact_arithmetic() {
        let a = d(3, 2); // 0.75
        let b = d(1, 1); // 0.5
        assert_eq!(a.add(&b), d(5, 2));
        assert_eq!(a.sub(&b), d(1, 2));
        assert_eq!(a.mul(&b), d(3, 3));
        assert_eq!(a.midpoint(&b), d(5, 3));
    }

    #[test]
    fn ordering_is_exact() {
        assert!(d(1, 2) < d(3, 3)); // 1/4 < 3/8
        assert!(d(-1, 1) < d(0, 0));
        assert_eq!(d(4, 2), d(1, 0));
    }

    #[test]
    fn rounding_directions() {
        let x = d(5, 3); // 0.625
        assert_eq!(x.round_to_bits(1, Rounding::Floor), d(1, 1));
        assert_eq!(x.round_to_bits(1, Rounding::Ceil), d(1, 0));
        assert_eq!(x.round_to_bits(2, Rounding::Nearest), d(3, 2));
        let neg = d(-5, 3);
        assert_eq!(neg.round_to_bits(1, Rounding::Floor), d(-1, 0));
        assert_eq!(neg.round_to_bits(1, Rounding::Ceil), d(-1, 1));
    }

    #[test]
    fn f64_roundtrip_is_exact() {
        let x = DyadicRational::from_f64(0.1).unwrap();
        // 0.1 is not 1/10 in binary; conversion must capture the true bits.
        assert_ne!(x.to_rational(), BigRational::new(BigInt::from(1), BigInt::from(10)));
        assert_eq!(x.to_f64(), 0.1);
        assert_eq!(DyadicRational::from_f64(0.5).unwrap(), d(1, 1));
    }

    #[test]
    fn parse_forms() {
        assert_eq!(
            DyadicRational::from_rational(&DyadicRational::parse_rational("3.25").unwrap()),
            Some(d(13, 2))
        );
        assert_eq!(
            DyadicRational::parse_rational("39/10"),
            Some(BigRational::new(BigInt::from(39), BigInt::from(10)))
        );
        assert!(DyadicRational::from_rational(&DyadicRational::parse_rational("0.1").unwrap()).is_none());
        assert_eq!(
            DyadicRational::from_rational(&DyadicRational::parse_rational("-0.75").unwrap()),
            Some(d(-3, 2))
        );
    }

    #[test]
    fn serde_wire_format() {
        let x = d(27097, 15);
        let js = serde_json::to_string(&x).unwrap();
        assert_eq!(js, r#"{"num":"27097","exp":15}"#);
        let back: DyadicRational = serde_json::from_str(&js).unwrap();
        assert_eq!(back, x);
    }
}
