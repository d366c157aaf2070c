//! EXP2 with rewards in place of losses and a G-optimal exploration design.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::design::{approx_design, RangeInverse};
use crate::error::{Error, Result};
use crate::linalg::ArmVector;
use crate::policies::{argmax, check_arm_set, ActionDistribution, Policy, PolicyDecision};
use crate::SimRng;

/// Horizon-tuned `(γ, η)`: `γ = sqrt(g²·ln K / ((2g + d)·n))`, `η = γ/g`.
pub fn exp2_tuning(g: f64, arms: usize, dim: usize, horizon: usize) -> (f64, f64) {
    let gamma = (g * g * (arms as f64).ln() / ((2.0 * g + dim as f64) * horizon as f64)).sqrt();
    (gamma, gamma / g)
}

/// `P(a) = γ·π(a) + (1−γ)·softmax(η·⟨a, Σθ̂⟩)`.
pub fn exp2_distribution(
    cumulative: &DVector<f64>,
    arms: &[ArmVector],
    exploration: &[f64],
    gamma: f64,
    eta: f64,
) -> Result<ActionDistribution> {
    check_arm_set(arms, cumulative.len())?;
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::invalid(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::invalid(format!("eta must be positive, got {eta}")));
    }
    if exploration.len() != arms.len() {
        return Err(Error::invalid("exploration design does not match the arm set"));
    }
    let scores: Vec<f64> = arms.iter().map(|a| a.dot(cumulative)).collect();
    let emp_best = argmax(scores.iter().copied());
    let top = scores[emp_best];
    let weights: Vec<f64> = scores.iter().map(|s| (eta * (s - top)).exp()).collect();
    let total: f64 = weights.iter().sum();
    let f: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let probs: Vec<f64> = exploration
        .iter()
        .zip(&f)
        .map(|(pi, w)| gamma * pi + (1.0 - gamma) * w)
        .collect();
    Ok(ActionDistribution {
        p_prime: probs.clone(),
        probs,
        f,
        q: exploration.to_vec(),
        b_set: Vec::new(),
        emp_best,
        gaps: scores.iter().map(|s| top - s).collect(),
    })
}

#[derive(Clone, Debug)]
struct Tuned {
    arms: Vec<ArmVector>,
    exploration: Vec<f64>,
    gamma: f64,
    eta: f64,
}

/// EXP2 over a fixed arm set. The exploration design and the default tuning
/// are computed on the first decision and recomputed if the arm set changes.
#[derive(Clone, Debug)]
pub struct Exp2Policy {
    dim: usize,
    horizon: usize,
    gamma: Option<f64>,
    eta: Option<f64>,
    tuned: Option<Tuned>,
    cumulative: DVector<f64>,
    // Q⁺ for each decision whose reward has not been observed yet.
    pending: VecDeque<RangeInverse>,
}

impl Exp2Policy {
    pub fn new(dim: usize, horizon: usize) -> Result<Self> {
        if dim == 0 || horizon == 0 {
            return Err(Error::invalid("EXP2 needs positive dimension and horizon"));
        }
        Ok(Self {
            dim,
            horizon,
            gamma: None,
            eta: None,
            tuned: None,
            cumulative: DVector::zeros(dim),
            pending: VecDeque::new(),
        })
    }

    /// Overrides the horizon-tuned parameters.
    pub fn with_parameters(mut self, gamma: Option<f64>, eta: Option<f64>) -> Self {
        self.gamma = gamma;
        self.eta = eta;
        self
    }

    /// `(γ, η)` in effect, once the first decision has been made.
    pub fn parameters(&self) -> Option<(f64, f64)> {
        self.tuned.as_ref().map(|t| (t.gamma, t.eta))
    }

    pub fn exploration(&self) -> Option<&[f64]> {
        self.tuned.as_ref().map(|t| t.exploration.as_slice())
    }

    pub fn cumulative_estimate(&self) -> &DVector<f64> {
        &self.cumulative
    }

    fn tune(&mut self, arms: &[ArmVector]) -> Result<&Tuned> {
        let stale = self.tuned.as_ref().is_none_or(|t| t.arms != arms);
        if stale {
            let (design, report) = approx_design(arms)?;
            let (g_gamma, g_eta) = exp2_tuning(report.max_leverage, arms.len(), self.dim, self.horizon);
            let gamma = self.gamma.unwrap_or(g_gamma);
            let eta = self.eta.unwrap_or(if self.gamma.is_some() {
                gamma / report.max_leverage
            } else {
                g_eta
            });
            self.tuned = Some(Tuned {
                arms: arms.to_vec(),
                exploration: design.to_dense(arms.len()),
                gamma,
                eta,
            });
        }
        Ok(self.tuned.as_ref().expect("tuned above"))
    }
}

impl Policy for Exp2Policy {
    fn name(&self) -> &str {
        "EXP2"
    }

    fn decide(&mut self, arms: &[ArmVector], rng: &mut SimRng) -> Result<PolicyDecision> {
        check_arm_set(arms, self.dim)?;
        let tuned = self.tune(arms)?.clone();
        let dist = exp2_distribution(&self.cumulative, arms, &tuned.exploration, tuned.gamma, tuned.eta)?;
        let mut q = DMatrix::<f64>::zeros(self.dim, self.dim);
        for (a, &p) in arms.iter().zip(&dist.probs) {
            q.ger(p, a.as_vector(), a.as_vector(), 1.0);
        }
        self.pending.push_back(RangeInverse::new(&q));
        Ok(PolicyDecision::sampled(dist, rng))
    }

    fn observe(&mut self, arm: &ArmVector, reward: f64) -> Result<()> {
        let q_pinv = self
            .pending
            .pop_front()
            .ok_or_else(|| Error::invalid("EXP2 observed a reward without a pending decision"))?;
        let estimate = q_pinv.apply(arm.as_vector()) * reward;
        self.cumulative += estimate;
        Ok(())
    }
}
