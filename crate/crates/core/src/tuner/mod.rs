//! Finite-stage parameter tuning: steer the critical orbit to spend
//! prescribed time fractions near chosen periodic orbits, then close it
//! into a superattracting cycle whose uniform measure realizes the target
//! statistics.

mod cache;
mod schedule;
mod steer;
mod tune;
mod windows;

pub use cache::TuneCache;
pub use schedule::{dwell_schedule, DwellEntry, OverheadModel, Schedule};
pub use steer::{narrow_with_recovery, recenter as recenter_model, CriticalOrbit, SteerState};
pub use tune::{tune, MassReport, TuneRequest, TunedParameter};
pub use windows::{pullback_windows, PullbackWindow, WindowChain};

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::DynamicsError;
use crate::measures::MeasuresError;
use crate::numerics::NumericsError;
use crate::ratio;

/// Requested statistical profile: weights per orbit index, summing to 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TargetProfile {
    pub entries: Vec<ProfileEntry>,
    /// Headline tolerance: the W1 residual bound on the achieved measure.
    #[serde(with = "ratio::pq_string")]
    pub tolerance: BigRational,
    /// Mass bookkeeping tolerance per orbit (defaults to `tolerance`).
    #[serde(with = "ratio::pq_string")]
    pub mass_tolerance: BigRational,
    /// Entry whose weight absorbs scheduling overhead (the undistributed
    /// tail of a finite-stage pair profile); its realized mass may fall
    /// short of its weight.
    pub tail_index: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub orbit_index: u64,
    #[serde(with = "ratio::pq_string")]
    pub weight: BigRational,
}

impl TargetProfile {
    pub fn new(
        entries: Vec<(u64, BigRational)>,
        tolerance: BigRational,
    ) -> Result<Self, TunerError> {
        let mass_tolerance = tolerance.clone();
        Self::with_tolerances(entries, tolerance, mass_tolerance, None)
    }

    pub fn with_tolerances(
        entries: Vec<(u64, BigRational)>,
        tolerance: BigRational,
        mass_tolerance: BigRational,
        tail_index: Option<u64>,
    ) -> Result<Self, TunerError> {
        if entries.is_empty() {
            return Err(TunerError::BadProfile("no entries".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        let mut total = BigRational::zero();
        for (idx, w) in &entries {
            if !seen.insert(*idx) {
                return Err(TunerError::BadProfile(format!("duplicate orbit {idx}")));
            }
            if !w.is_positive() {
                return Err(TunerError::BadProfile("weights must be positive".into()));
            }
            total += w;
        }
        if total != BigRational::one() {
            return Err(TunerError::BadProfile(format!("weights sum to {}", ratio::to_pq(&total))));
        }
        if !tolerance.is_positive() || !mass_tolerance.is_positive() {
            return Err(TunerError::BadProfile("tolerances must be positive".into()));
        }
        if let Some(t) = tail_index {
            if !seen.contains(&t) {
                return Err(TunerError::BadProfile(format!("tail orbit {t} not in profile")));
            }
        }
        Ok(TargetProfile {
            entries: entries
                .into_iter()
                .map(|(orbit_index, weight)| ProfileEntry { orbit_index, weight })
                .collect(),
            tolerance,
            mass_tolerance,
            tail_index,
        })
    }
}

#[derive(Debug, Error)]
pub enum TunerError {
    #[error("invalid profile: {0}")]
    BadProfile(String),
    #[error("bracket must sit inside (c, 4), clear of the tip")]
    BadBracket,
    #[error("bracket is not contained in a single dyadic cell of depth {0}")]
    FrozenCellViolated(u64),
    #[error("no spreading window certified for orbit {orbit}")]
    SpreadingFailed { orbit: u64 },
    #[error("window chain for orbit {orbit} failed to contract")]
    ContractionInconclusive { orbit: u64 },
    #[error("window chain certificate failed for orbit {orbit} at level {level}")]
    ChainUncertified { orbit: u64, level: u64 },
    #[error("overhead cannot be amortized at this stage length")]
    ToleranceInfeasible,
    #[error("parameter window collapsed at orbit time {t}")]
    WindowCollapse { t: u64 },
    #[error("model remainder dominates the target at orbit time {t}")]
    RemainderDominates { t: u64 },
    #[error("sweep does not cover the target at orbit time {t}")]
    SweepTooNarrow { t: u64 },
    #[error("steering predicate inconsistent with a monotone sweep at time {t}")]
    NonMonotoneKneading { t: u64 },
    #[error("dwell accounting failed: {0}")]
    Accounting(String),
    #[error("achieved measure misses the target: W1 residual {residual} > tolerance {tolerance}")]
    ResidualTooLarge { residual: String, tolerance: String },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Measures(#[from] Box<MeasuresError>),
    #[error("cache i/o: {0}")]
    Cache(String),
}

impl From<MeasuresError> for TunerError {
    fn from(e: MeasuresError) -> Self {
        TunerError::Measures(Box::new(e))
    }
}
