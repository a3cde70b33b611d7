//! Primitive cyclic words over {0,1} naming periodic orbits of the
//! two-branch stage, under the order `1 < 0` used throughout.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::DynamicsError;

/// A primitive cyclic word stored as its minimal rotation under `1 < 0`.
/// `true` is the letter 1 (right branch), `false` the letter 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SymbolicWord {
    letters: Vec<bool>,
}

/// Rank a letter for the `1 < 0` order.
fn rank(letter: bool) -> u8 {
    if letter { 0 } else { 1 }
}

fn word_cmp(a: &[bool], b: &[bool]) -> std::cmp::Ordering {
    let ra = a.iter().map(|&l| rank(l));
    let rb = b.iter().map(|&l| rank(l));
    ra.cmp(rb)
}

fn is_primitive(w: &[bool]) -> bool {
    let n = w.len();
    for d in 1..n {
        if n % d == 0 && (0..n).all(|i| w[i] == w[i % d]) {
            return false;
        }
    }
    true
}

fn minimal_rotation(w: &[bool]) -> Vec<bool> {
    let n = w.len();
    let mut best: Vec<bool> = w.to_vec();
    for s in 1..n {
        let rot: Vec<bool> = (0..n).map(|i| w[(i + s) % n]).collect();
        if word_cmp(&rot, &best) == std::cmp::Ordering::Less {
            best = rot;
        }
    }
    best
}

impl SymbolicWord {
    pub fn new(letters: Vec<bool>) -> Result<Self, DynamicsError> {
        if letters.is_empty() {
            return Err(DynamicsError::EmptyWord);
        }
        if !is_primitive(&letters) {
            return Err(DynamicsError::NotPrimitive);
        }
        Ok(SymbolicWord { letters: minimal_rotation(&letters) })
    }

    pub fn parse(s: &str) -> Result<Self, DynamicsError> {
        let letters = s
            .chars()
            .map(|c| match c {
                '1' => Ok(true),
                '0' => Ok(false),
                _ => Err(DynamicsError::EmptyWord),
            })
            .collect::<Result<Vec<_>, _>>()?;
        SymbolicWord::new(letters)
    }

    pub fn letters(&self) -> &[bool] {
        &self.letters
    }

    /// The period under the stage map (the paper's `k_n`).
    pub fn g_period(&self) -> usize {
        self.letters.len()
    }

    /// Left rotation by `s`: the itinerary of the s-th orbit point.
    pub fn rotation(&self, s: usize) -> Vec<bool> {
        let n = self.letters.len();
        (0..n).map(|i| self.letters[(i + s) % n]).collect()
    }
}

impl fmt::Display for SymbolicWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &l in &self.letters {
            f.write_str(if l { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl Serialize for SymbolicWord {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SymbolicWord {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        SymbolicWord::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// The first `count` primitive cyclic words: ordered by period, then
/// lexicographically on minimal rotations with `1 < 0`. The word "1" comes
/// first.
pub fn enumerate_words(count: usize) -> Vec<SymbolicWord> {
    let mut out = Vec::with_capacity(count);
    let mut period = 1usize;
    while out.len() < count {
        assert!(period <= 30, "word enumeration beyond period 30 is not supported");
        let mut this_period: Vec<Vec<bool>> = Vec::new();
        for mask in 0..(1u64 << period) {
            // bit i = letter i, with 1 as the small letter
            let w: Vec<bool> = (0..period).map(|i| mask >> i & 1 == 0).collect();
            if is_primitive(&w) && minimal_rotation(&w) == w {
                this_period.push(w);
            }
        }
        this_period.sort_by(|a, b| word_cmp(a, b));
        for w in this_period {
            if out.len() == count {
                break;
            }
            out.push(SymbolicWord { letters: w });
        }
        period += 1;
    }
    out
}

/// 1-based lookup matching the enumeration order.
pub fn word_by_index(n: u64) -> SymbolicWord {
    enumerate_words(n as usize).pop().expect("count >= 1")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_words_follow_the_stated_order() {
        let ws: Vec<String> = enumerate_words(5).iter().map(|w| w.to_string()).collect();
        assert_eq!(ws, ["1", "0", "10", "110", "100"]);
    }

    #[test]
    fn counts_by_period_match_exhaustive_enumeration() {
        // independent oracle: collect all binary words up to rotation
        let mut counts = Vec::new();
        for period in 1..=5usize {
            let mut classes: std::collections::HashSet<Vec<bool>> = Default::default();
            for mask in 0..(1u64 << period) {
                let w: Vec<bool> = (0..period).map(|i| mask >> i & 1 == 1).collect();
                if is_primitive(&w) {
                    classes.insert(minimal_rotation(&w));
                }
            }
            counts.push(classes.len());
        }
        assert_eq!(counts, [2, 1, 2, 3, 6]);
        // and the enumerator agrees
        let words = enumerate_words(2 + 1 + 2 + 3 + 6);
        for p in 1..=5 {
            assert_eq!(
                words.iter().filter(|w| w.g_period() == p).count(),
                counts[p - 1],
                "period {p}"
            );
        }
    }

    #[test]
    fn canonical_rotation_is_minimal_under_one_before_zero() {
        let w = SymbolicWord::parse("011").unwrap();
        assert_eq!(w.to_string(), "110");
        let v = SymbolicWord::parse("001").unwrap();
        assert_eq!(v.to_string(), "100");
    }

    #[test]
    fn rejects_non_primitive() {
        assert!(SymbolicWord::parse("1010").is_err());
        assert!(SymbolicWord::parse("11").is_err());
    }

    #[test]
    fn rotations_enumerate_orbit_itineraries() {
        let w = SymbolicWord::parse("100").unwrap();
        assert_eq!(w.rotation(0), vec![true, false, false]);
        assert_eq!(w.rotation(1), vec![false, false, true]);
        assert_eq!(w.rotation(2), vec![false, true, false]);
    }
}
