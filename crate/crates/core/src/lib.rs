//! Stochastic linear bandits with closed-form arm-sampling probabilities.
//!
//! The crate is organised bottom-up: [`linalg`] keeps the online ridge state,
//! [`design`] computes approximate G-optimal designs, [`policies`] holds
//! LinMED and the baselines, [`envs`] simulates instances, [`ope`] evaluates
//! logged data and [`harness`] runs seeded experiments.

pub mod design;
pub mod envs;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod ope;
pub mod policies;

/// Random number generator used for every simulated stream.
pub type SimRng = rand_chacha::ChaCha8Rng;

pub use design::{approx_design, bh_spanner, design_augmented, AugmentVersion, Design, DesignReport};
pub use envs::{Instance, StepOutcome};
pub use error::{Error, Result};
pub use linalg::{ArmVector, ConfidenceParams, DeltaSchedule, GramState};
pub use ope::{ipw_estimate, log_run, oracle_value, IpwResult, LogRecord};
pub use policies::{ActionDistribution, Policy, PolicyDecision};
