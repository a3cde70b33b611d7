//! Certified arbitrary-precision substrate: dyadic rationals, intervals
//! with directed rounding, lazily refined real parameters with dyadic
//! oracles, and monotone bisection.

mod bisect;
mod dyadic;
mod interval;
mod iterate;
mod lazy;

pub use bisect::{bisect_monotone, bisect_monotone_checked, BisectOutcome};
pub use dyadic::{DyadicRational, Rounding};
pub use interval::DyadicInterval;
pub use iterate::{iterate_enclosure, iterate_trajectory, orbit_derivative, work_bits_for};
pub use lazy::{critical_orbit_at_least_half, LazyParameter, OracleLog, Refiner};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("refiner cannot reach width 2^-{requested} (best {achieved_log2} bits)")]
    RefinementExhausted { requested: u64, achieved_log2: i64 },
    #[error("predicate does not change sign over the bracket")]
    NoSignChange,
    #[error("interior probe at step {probe} is inconsistent with a monotone predicate")]
    MonotonicityViolation { probe: usize },
    #[error("enclosure width exceeded 1 at iterate {step}; raise work_bits")]
    EnclosureBlowup { step: u64 },
    #[error("iterate left the invariant domain [0,1] at step {step}")]
    DomainEscape { step: u64 },
    #[error("oracle answer at depth {depth} would move under the refined interval")]
    FrozenPrefixViolated { depth: u64 },
    #[error("parameter is not representable for this refiner: {0}")]
    BadParameter(String),
}
