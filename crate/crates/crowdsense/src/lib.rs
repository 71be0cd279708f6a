//! Approximate a crowd's majority vote on a budget.
//!
//! Collecting every labeler's vote on every item is expensive; this crate
//! implements CrowdSense, an online collector that estimates each labeler's
//! agreement with the crowd as it goes and, per example, buys just enough
//! votes to be confident that the weighted decision matches what the full
//! crowd would have said. Alongside the engine it ships the comparison
//! methods (interval-estimation selection, random just-over-half subsets,
//! average/best labeler), a synthetic-crowd simulator, and a seeded
//! Monte-Carlo harness with bit-stable CSV reporting, all driven by the
//! `crowdsense` CLI.
//!
//! The quality/score arithmetic is generic over a floating-point [`Scalar`]
//! (`f32` or `f64`); the aliases below pin the common `f64` instantiation.

pub mod baselines;
pub mod core;
pub mod crowdsim;
pub mod engine;
pub mod harness;
mod rngutil;
pub mod scalar;

pub use crate::core::{LabelerState, Quality, Vote, VoteMatrix};
pub use crate::engine::{EngineConfig, GoldSet, RoundTrace, RunMetrics, RunOutcome};
pub use crate::scalar::Scalar;

/// [`EngineConfig`] over the default `f64` scalar.
pub type EngineConfig64 = EngineConfig<f64>;
/// [`RoundTrace`] over the default `f64` scalar.
pub type RoundTrace64 = RoundTrace<f64>;
/// [`RunOutcome`] over the default `f64` scalar.
pub type RunOutcome64 = RunOutcome<f64>;
/// [`Quality`] over the default `f64` scalar.
pub type Quality64 = Quality<f64>;

/// Published per-labeler agreement-with-majority percentages of four
/// benchmark crowds. They double as latent-accuracy targets for
/// [`crowdsim::synthesize_crowd`] when reproducing desk-scale versions of
/// those crowds (the realized agreement rates then land close to, but not
/// exactly on, these values).
pub const MOVIELENS_AGREEMENT_RATES: [f64; 11] = [
    48.17, 89.78, 93.43, 48.90, 59.12, 96.35, 87.59, 54.01, 47.44, 94.16, 95.62,
];

pub const CHEMIR_AGREEMENT_RATES: [f64; 11] = [
    50.72, 46.78, 84.46, 88.41, 86.69, 87.46, 49.52, 78.62, 82.06, 50.12, 50.98,
];

pub const REUTERS_AGREEMENT_RATES: [f64; 13] = [
    80.76, 83.00, 89.70, 82.98, 88.12, 87.04, 95.42, 80.21, 78.68, 95.06, 82.88, 71.57, 87.54,
];

pub const ADULT_AGREEMENT_RATES: [f64; 13] = [
    81.22, 80.59, 86.22, 87.63, 91.12, 94.11, 56.68, 85.51, 81.32, 85.54, 79.74, 84.86, 96.71,
];
