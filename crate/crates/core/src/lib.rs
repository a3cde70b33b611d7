//! A computational laboratory for the logistic family `f_a(x) = a x (1-x)`.
//!
//! The crate is organized around a certified-arithmetic substrate
//! ([`numerics`]), the third-iterate horseshoe of the map ([`dynamics`]),
//! exact finitely supported measures with Wasserstein-1 distance
//! ([`measures`]), attracting-orbit certification ([`sink`]), a parameter
//! tuner that places prescribed statistical mass on chosen periodic orbits
//! ([`tuner`]), and a finite-round estimation game against pluggable
//! oracle-querying opponents ([`game`]).

pub mod dynamics;
pub mod game;
pub mod measures;
pub mod numerics;
pub mod ratio;
pub mod rng;
pub mod sink;
pub mod tuner;

pub use numerics::{DyadicInterval, DyadicRational, LazyParameter};
