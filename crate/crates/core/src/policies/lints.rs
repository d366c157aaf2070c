use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{ArmVector, ConfidenceParams, GramState};
use crate::policies::{argmax, check_arm_set, Policy, PolicyDecision};
use crate::SimRng;

/// Posterior-scale convention for linear Thompson sampling.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinTsVariant {
    /// Covariance `β_{t−1}·V⁻¹` (oversampled frequentist form).
    Freq,
    /// Covariance `σ²·V⁻¹`.
    Bayes,
}

impl LinTsVariant {
    fn scale(self, gram: &GramState, conf: &ConfidenceParams) -> Result<f64> {
        match self {
            LinTsVariant::Freq => gram.beta(conf),
            LinTsVariant::Bayes => Ok(conf.sigma * conf.sigma),
        }
    }
}

/// Gaussian perturbation `θ̃ = θ̂ + sqrt(c)·L z` with `L Lᵀ = V⁻¹`.
struct PerturbedSampler {
    mean: DVector<f64>,
    factor: DMatrix<f64>,
    z: DVector<f64>,
    theta: DVector<f64>,
}

impl PerturbedSampler {
    fn new(gram: &GramState, scale: f64) -> Result<Self> {
        let chol = gram
            .gram_inverse()
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Internal {
                message: "inverse Gram matrix is not positive definite".into(),
                report: format!("t={}", gram.rounds()),
            })?;
        let d = gram.dim();
        Ok(Self {
            mean: gram.theta_hat().clone(),
            factor: chol.unpack() * scale.max(0.0).sqrt(),
            z: DVector::zeros(d),
            theta: DVector::zeros(d),
        })
    }

    fn draw_choice(&mut self, arms: &[ArmVector], rng: &mut SimRng) -> usize {
        let d = self.mean.len();
        for i in 0..d {
            self.z[i] = StandardNormal.sample(rng);
        }
        for i in 0..d {
            let mut acc = self.mean[i];
            for j in 0..=i {
                acc += self.factor[(i, j)] * self.z[j];
            }
            self.theta[i] = acc;
        }
        argmax(arms.iter().map(|a| a.dot(&self.theta)))
    }
}

/// One Thompson draw; the propensity is left unknown.
pub fn lints_sample(
    gram: &GramState,
    arms: &[ArmVector],
    variant: LinTsVariant,
    confidence: &ConfidenceParams,
    rng: &mut SimRng,
) -> Result<PolicyDecision> {
    check_arm_set(arms, gram.dim())?;
    let mut sampler = PerturbedSampler::new(gram, variant.scale(gram, confidence)?)?;
    Ok(PolicyDecision {
        arm_index: sampler.draw_choice(arms, rng),
        propensity: None,
        propensity_samples: None,
        distribution: None,
    })
}

/// Empirical argmax frequencies over `samples` independent draws.
pub fn lints_propensity_mc(
    gram: &GramState,
    arms: &[ArmVector],
    variant: LinTsVariant,
    confidence: &ConfidenceParams,
    samples: usize,
    rng: &mut SimRng,
) -> Result<Vec<f64>> {
    check_arm_set(arms, gram.dim())?;
    if samples == 0 {
        return Err(Error::invalid("Monte-Carlo sample count must be positive"));
    }
    let mut sampler = PerturbedSampler::new(gram, variant.scale(gram, confidence)?)?;
    let mut counts = vec![0usize; arms.len()];
    for _ in 0..samples {
        counts[sampler.draw_choice(arms, rng)] += 1;
    }
    Ok(counts
        .into_iter()
        .map(|c| c as f64 / samples as f64)
        .collect())
}

#[derive(Clone, Debug)]
pub struct LinTsPolicy {
    gram: GramState,
    confidence: ConfidenceParams,
    variant: LinTsVariant,
    mc_samples: Option<usize>,
}

impl LinTsPolicy {
    pub fn new(
        dim: usize,
        variant: LinTsVariant,
        confidence: ConfidenceParams,
        lambda: f64,
    ) -> Result<Self> {
        Ok(Self {
            gram: GramState::new(dim, lambda)?,
            confidence,
            variant,
            mc_samples: None,
        })
    }

    /// Estimate the propensity of each chosen arm from `samples` extra draws,
    /// independent of the draw that picked the arm.
    pub fn with_propensity_samples(mut self, samples: usize) -> Self {
        self.mc_samples = Some(samples);
        self
    }
}

impl Policy for LinTsPolicy {
    fn name(&self) -> &str {
        match self.variant {
            LinTsVariant::Freq => "LinTS-Freq",
            LinTsVariant::Bayes => "LinTS-Bayes",
        }
    }

    fn decide(&mut self, arms: &[ArmVector], rng: &mut SimRng) -> Result<PolicyDecision> {
        check_arm_set(arms, self.gram.dim())?;
        let scale = self.variant.scale(&self.gram, &self.confidence)?;
        let mut sampler = PerturbedSampler::new(&self.gram, scale)?;
        let arm_index = sampler.draw_choice(arms, rng);
        let (propensity, propensity_samples) = match self.mc_samples {
            Some(m) if m > 0 => {
                let mut hits = 0usize;
                for _ in 0..m {
                    if sampler.draw_choice(arms, rng) == arm_index {
                        hits += 1;
                    }
                }
                (Some(hits as f64 / m as f64), Some(m))
            }
            _ => (None, None),
        };
        Ok(PolicyDecision {
            arm_index,
            propensity,
            propensity_samples,
            distribution: None,
        })
    }

    fn observe(&mut self, arm: &ArmVector, reward: f64) -> Result<()> {
        self.gram.update(arm, reward)
    }
}
