//! The renormalization stage of the logistic family: the third iterate, its
//! two-branch horseshoe, symbolic dynamics, and the canonical enumeration
//! of periodic orbits.

mod orbits;
mod stage;
mod words;

pub use orbits::{
    itinerary, lambda_measure, solve_periodic_orbit, solve_periodic_orbit_at, Itinerary,
    ItineraryOutcome, PeriodicOrbit,
};
pub use stage::{
    find_tip_c, g_box, g_derivative_box, solve_g_preimage, solve_g_preimage_hinted,
    solve_g_preimage_sided, solve_stage, solve_stage_at, PreimageSide, StageGeometry,
};
pub use words::{enumerate_words, word_by_index, SymbolicWord};

use thiserror::Error;

use crate::numerics::NumericsError;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("words must be nonempty binary strings")]
    EmptyWord,
    #[error("word is a repetition of a shorter word")]
    NotPrimitive,
    #[error("no certified sign change located at the scanning resolution")]
    NotFound,
    #[error("root selection ambiguous or landmark certificates failed; raise bits")]
    BranchLost,
    #[error("could not certify a sign at the precision cap")]
    PrecisionExhausted,
    #[error("enclosure straddles a branch boundary at step {step}")]
    Undecidable { step: u64 },
    #[error("solved point of orbit {index} (rotation {rotation}) has the wrong itinerary")]
    WrongItinerary { index: u64, rotation: u64 },
    #[error("g does not map point {rotation} of orbit {index} into its successor")]
    ChainBroken { index: u64, rotation: u64 },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}
