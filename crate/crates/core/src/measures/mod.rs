//! Finitely supported measures, empirical statistics, exact Wasserstein-1
//! distance, and the effective test-function family.

mod discrete;
pub(crate) mod empirical;
mod separating;
mod tau;
mod testfn;

pub use discrete::{Atom, DiscreteMeasure};
pub use empirical::{
    birkhoff_measure, dyadic_from_fixed, fixed_scale, fixed_step, monte_carlo_measure,
    omega_diagnostic, orbit_average_fixed, Checkpoint, ConvergenceReport, Verdict,
};
pub use separating::{separating_tau, separating_tau_avoiding, SeparatingTau};
pub use tau::{enumerate_tau, TauEnumerator, TAU_SCHEME};
pub use testfn::{Breakpoint, TestFunction};

use thiserror::Error;

use crate::dynamics::DynamicsError;
use crate::numerics::NumericsError;

#[derive(Debug, Error)]
pub enum MeasuresError {
    #[error("empty input")]
    Empty,
    #[error("weights must be positive, got {0}")]
    BadWeight(String),
    #[error("weights sum to {0}, expected 1")]
    NotNormalized(String),
    #[error("breakpoint abscissae must be strictly increasing")]
    BreakpointsNotIncreasing,
    #[error("schedule must be nonempty and strictly increasing")]
    BadSchedule,
    #[error("parameter {0} outside [0,4]")]
    ParameterOutOfRange(String),
    #[error("cannot separate orbit {target} from orbit {clash} at this precision; raise bits")]
    SeparationImpossible { target: u64, clash: u64 },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Dynamics(#[from] Box<DynamicsError>),
}

impl From<DynamicsError> for MeasuresError {
    fn from(e: DynamicsError) -> Self {
        MeasuresError::Dynamics(Box::new(e))
    }
}
