//! Arm-selection policies behind a common decision interface.
//!
//! Every policy reports a [`PolicyDecision`]. Policies whose sampling
//! distribution has a closed form (LinMED, LinMEDNOPT, EXP2) attach it, so
//! the propensity of the chosen arm can be logged exactly.

mod exp2;
mod lints;
mod linmed;
mod oful;

pub use exp2::{exp2_distribution, exp2_tuning, Exp2Policy};
pub use lints::{lints_propensity_mc, lints_sample, LinTsPolicy, LinTsVariant};
pub use linmed::{
    linmed_distribution, linmednopt_distribution, LinMedConfig, LinMedNoptPolicy, LinMedPolicy,
    LINMED_PRESETS,
};
pub use oful::{oful_select, OfulPolicy};

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::ArmVector;
use crate::SimRng;

/// Sampling probabilities over the current arm set plus the intermediate
/// quantities that produced them.
///
/// For LinMED every field has its usual meaning. Policies without a mixing
/// step fill `q` with their base measure and set `p_prime = probs`.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionDistribution {
    pub probs: Vec<f64>,
    pub f: Vec<f64>,
    pub q: Vec<f64>,
    pub p_prime: Vec<f64>,
    /// Arms whose leverage exceeds one.
    pub b_set: Vec<usize>,
    pub emp_best: usize,
    pub gaps: Vec<f64>,
}

impl ActionDistribution {
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Draws an index by inverse CDF over arm order.
    pub fn sample(&self, rng: &mut SimRng) -> usize {
        sample_index(&self.probs, rng)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyDecision {
    pub arm_index: usize,
    /// Probability with which `arm_index` was chosen, when known. Monte-Carlo
    /// estimates may be exactly zero.
    pub propensity: Option<f64>,
    /// Number of Monte-Carlo draws behind `propensity`, if it is an estimate.
    pub propensity_samples: Option<usize>,
    pub distribution: Option<ActionDistribution>,
}

impl PolicyDecision {
    pub(crate) fn deterministic(arm_index: usize) -> Self {
        Self {
            arm_index,
            propensity: Some(1.0),
            propensity_samples: None,
            distribution: None,
        }
    }

    pub(crate) fn sampled(dist: ActionDistribution, rng: &mut SimRng) -> Self {
        let arm_index = dist.sample(rng);
        Self {
            arm_index,
            propensity: Some(dist.probs[arm_index]),
            propensity_samples: None,
            distribution: Some(dist),
        }
    }
}

/// A stateful bandit learner.
///
/// `observe` is called once per decision, in decision order, possibly several
/// rounds later when rewards are delayed.
pub trait Policy: Send {
    fn name(&self) -> &str;

    fn decide(&mut self, arms: &[ArmVector], rng: &mut SimRng) -> Result<PolicyDecision>;

    fn observe(&mut self, arm: &ArmVector, reward: f64) -> Result<()>;
}

/// Inverse-CDF draw; round-off past the last bucket lands on the last arm
/// with positive mass.
pub fn sample_index(probs: &[f64], rng: &mut SimRng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

pub(crate) fn check_arm_set(arms: &[ArmVector], dim: usize) -> Result<()> {
    if arms.is_empty() {
        return Err(Error::invalid("arm set must be nonempty"));
    }
    if let Some(bad) = arms.iter().position(|a| a.dim() != dim) {
        return Err(Error::invalid(format!(
            "arm {bad} has dimension {}, expected {dim}",
            arms[bad].dim()
        )));
    }
    Ok(())
}

/// First index attaining the maximum.
pub(crate) fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    best
}
