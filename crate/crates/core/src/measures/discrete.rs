//! Finitely supported probability measures on [0,1] with exact rational
//! weights and dyadic atom positions.

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::numerics::{DyadicInterval, DyadicRational};
use crate::ratio;

use super::MeasuresError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Atom {
    pub x: DyadicRational,
    #[serde(with = "ratio::pq_string")]
    pub w: BigRational,
}

/// Sorted, duplicate-merged atom list with weights summing to exactly 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    atoms: Vec<Atom>,
    #[serde(default)]
    pub meta: serde_json::Map<String, serde_json::Value>,
}

impl DiscreteMeasure {
    /// Build from raw (position, weight) pairs: sorts, merges equal
    /// positions, and checks normalization.
    pub fn new(pairs: Vec<(DyadicRational, BigRational)>) -> Result<Self, MeasuresError> {
        let mut pairs = pairs;
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        let mut atoms: Vec<Atom> = Vec::with_capacity(pairs.len());
        let mut total = BigRational::zero();
        for (x, w) in pairs {
            if w.is_negative() || w.is_zero() {
                return Err(MeasuresError::BadWeight(ratio::to_pq(&w)));
            }
            total += &w;
            match atoms.last_mut() {
                Some(last) if last.x == x => last.w += w,
                _ => atoms.push(Atom { x, w }),
            }
        }
        if total != BigRational::one() {
            return Err(MeasuresError::NotNormalized(ratio::to_pq(&total)));
        }
        Ok(DiscreteMeasure { atoms, meta: serde_json::Map::new() })
    }

    /// Uniform measure on a list of points (weights `1/len`), merging
    /// duplicates.
    pub fn uniform(points: Vec<DyadicRational>) -> Result<Self, MeasuresError> {
        let n = points.len();
        if n == 0 {
            return Err(MeasuresError::Empty);
        }
        let w = ratio::rat(1, n as i64);
        DiscreteMeasure::new(points.into_iter().map(|x| (x, w.clone())).collect())
    }

    pub fn dirac(x: DyadicRational) -> Self {
        DiscreteMeasure { atoms: vec![Atom { x, w: BigRational::one() }], meta: serde_json::Map::new() }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> BigRational {
        self.atoms.iter().map(|a| a.w.clone()).sum()
    }

    /// Exact mean position.
    pub fn mean(&self) -> BigRational {
        self.atoms.iter().map(|a| a.x.to_rational() * &a.w).sum()
    }

    /// Exact Wasserstein-1 distance: the L1 distance between the CDFs on the
    /// merged breakpoint grid (the closed form for one-dimensional
    /// transport).
    pub fn w1(&self, other: &Self) -> BigRational {
        let mut dist = BigRational::zero();
        let (mut i, mut j) = (0usize, 0usize);
        let mut cdf_gap = BigRational::zero(); // F_self - F_other so far
        let mut prev_x: Option<DyadicRational> = None;
        while i < self.atoms.len() || j < other.atoms.len() {
            let xi = self.atoms.get(i).map(|a| &a.x);
            let xj = other.atoms.get(j).map(|a| &a.x);
            let x = match (xi, xj) {
                (Some(a), Some(b)) => {
                    if a <= b { a.clone() } else { b.clone() }
                }
                (Some(a), None) => a.clone(),
                (None, Some(b)) => b.clone(),
                (None, None) => unreachable!(),
            };
            if let Some(px) = &prev_x {
                let seg = x.sub(px).to_rational();
                dist += ratio::abs(&cdf_gap) * seg;
            }
            while i < self.atoms.len() && self.atoms[i].x == x {
                cdf_gap += &self.atoms[i].w;
                i += 1;
            }
            while j < other.atoms.len() && other.atoms[j].x == x {
                cdf_gap -= &other.atoms[j].w;
                j += 1;
            }
            prev_x = Some(x);
        }
        dist
    }

    /// Mass inside the union of the given enclosures fattened by `radius`.
    /// The stated radius is part of any report built from this value.
    pub fn mass_near(&self, points: &[DyadicInterval], radius: &DyadicRational) -> BigRational {
        let mut regions: Vec<DyadicInterval> =
            points.iter().map(|p| p.inflate(radius)).collect();
        regions.sort_by(|a, b| a.lo().cmp(b.lo()));
        let mut merged: Vec<DyadicInterval> = Vec::with_capacity(regions.len());
        for r in regions {
            match merged.last_mut() {
                Some(last) if last.hi() >= r.lo() => *last = last.hull(&r),
                _ => merged.push(r),
            }
        }
        let mut mass = BigRational::zero();
        for a in &self.atoms {
            // merged regions are sorted; binary search for a candidate
            let idx = merged.partition_point(|r| r.hi() < &a.x);
            if idx < merged.len() && merged[idx].contains(&a.x) {
                mass += &a.w;
            }
        }
        mass
    }

    /// CSV rows `x,w` with exact fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,w\n");
        for a in &self.atoms {
            out.push_str(&format!("{},{}\n", a.x, ratio::to_pq(&a.w)));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(k: i64, m: u64) -> DyadicRational {
        DyadicRational::from_parts(k, m)
    }

    #[test]
    fn dirac_transport_is_distance() {
        let a = DiscreteMeasure::dirac(d(1, 2));
        let b = DiscreteMeasure::dirac(d(3, 2));
        assert_eq!(a.w1(&b), ratio::rat(1, 2));
        assert_eq!(a.w1(&a), BigRational::zero());
    }

    #[test]
    fn split_mass_to_center() {
        // W1(0.5 d0 + 0.5 d1, d_{1/2}) = 1/2
        let split = DiscreteMeasure::new(vec![
            (d(0, 0), ratio::rat(1, 2)),
            (d(1, 0), ratio::rat(1, 2)),
        ])
        .unwrap();
        let center = DiscreteMeasure::dirac(d(1, 1));
        assert_eq!(split.w1(&center), ratio::rat(1, 2));
    }

    #[test]
    fn merge_and_normalize() {
        let m = DiscreteMeasure::new(vec![
            (d(1, 1), ratio::rat(1, 3)),
            (d(2, 2), ratio::rat(1, 3)), // same point as 1/2
            (d(3, 2), ratio::rat(1, 3)),
        ])
        .unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.total_mass(), BigRational::one());
        let bad = DiscreteMeasure::new(vec![(d(0, 0), ratio::rat(1, 2))]);
        assert!(bad.is_err());
    }

    #[test]
    fn mass_near_counts_fattened_union() {
        let m = DiscreteMeasure::new(vec![
            (d(1, 3), ratio::rat(1, 4)), // 0.125
            (d(1, 2), ratio::rat(1, 4)), // 0.25
            (d(3, 2), ratio::rat(1, 2)), // 0.75
        ])
        .unwrap();
        let pts = [DyadicInterval::point(d(1, 2))];
        assert_eq!(m.mass_near(&pts, &d(1, 4)), ratio::rat(1, 4));
        // radius 1/8 reaches 0.125 too
        assert_eq!(m.mass_near(&pts, &d(1, 3)), ratio::rat(1, 2));
    }
}
