use crate::error::Result;
use crate::linalg::{ArmVector, ConfidenceParams, GramState};
use crate::policies::{argmax, check_arm_set, Policy, PolicyDecision};
use crate::SimRng;

/// Optimistic index `⟨θ̂, a⟩ + sqrt(β)·‖a‖_{V⁻¹}`, maximized with ties to the
/// lowest index.
pub fn oful_select(
    gram: &GramState,
    arms: &[ArmVector],
    confidence: &ConfidenceParams,
) -> Result<PolicyDecision> {
    check_arm_set(arms, gram.dim())?;
    let radius = gram.beta(confidence)?.sqrt();
    let theta = gram.theta_hat();
    let mut index = Vec::with_capacity(arms.len());
    for a in arms {
        index.push(a.dot(theta) + radius * gram.leverage(a)?.sqrt());
    }
    Ok(PolicyDecision::deterministic(argmax(index)))
}

#[derive(Clone, Debug)]
pub struct OfulPolicy {
    gram: GramState,
    confidence: ConfidenceParams,
}

impl OfulPolicy {
    pub fn new(dim: usize, confidence: ConfidenceParams, lambda: f64) -> Result<Self> {
        Ok(Self {
            gram: GramState::new(dim, lambda)?,
            confidence,
        })
    }
}

impl Policy for OfulPolicy {
    fn name(&self) -> &str {
        "OFUL"
    }

    fn decide(&mut self, arms: &[ArmVector], _rng: &mut SimRng) -> Result<PolicyDecision> {
        oful_select(&self.gram, arms, &self.confidence)
    }

    fn observe(&mut self, arm: &ArmVector, reward: f64) -> Result<()> {
        self.gram.update(arm, reward)
    }
}
