use crate::design::{design_augmented, AugmentVersion, Design};
use crate::error::{Error, Result};
use crate::linalg::{ArmVector, ConfidenceParams, GramState};
use crate::policies::{argmax, check_arm_set, ActionDistribution, Policy, PolicyDecision};
use crate::SimRng;

/// Named `(α_emp, α_opt)` pairs.
pub const LINMED_PRESETS: [(&str, f64, f64); 3] = [
    ("LinMED-99", 0.99, 0.005),
    ("LinMED-90", 0.90, 0.05),
    ("LinMED-50", 0.50, 0.25),
];

/// Squared Mahalanobis gaps at or below this count as `0/0 := 0`.
const ZERO_GAP: f64 = 1e-15;

/// Exponents below this floor map to the smallest normal float so that no
/// arm ever receives weight exactly zero.
const EXPONENT_FLOOR: f64 = -700.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinMedConfig {
    pub alpha_emp: f64,
    pub alpha_opt: f64,
    pub ver: AugmentVersion,
    pub confidence: ConfidenceParams,
    pub lambda: f64,
}

impl LinMedConfig {
    pub fn new(
        alpha_emp: f64,
        alpha_opt: f64,
        confidence: ConfidenceParams,
        lambda: f64,
    ) -> Result<Self> {
        let cfg = Self {
            alpha_emp,
            alpha_opt,
            ver: AugmentVersion::Rescale,
            confidence,
            lambda,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn preset(name: &str, confidence: ConfidenceParams, lambda: f64) -> Result<Self> {
        let (_, emp, opt) = LINMED_PRESETS
            .iter()
            .find(|(n, _, _)| n.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::invalid(format!("unknown LinMED preset {name}")))?;
        Self::new(*emp, *opt, confidence, lambda)
    }

    pub fn with_version(mut self, ver: AugmentVersion) -> Self {
        self.ver = ver;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| x > 0.0 && x < 1.0;
        if !unit(self.alpha_emp) || !unit(self.alpha_opt) {
            return Err(Error::invalid(format!(
                "alpha_emp={} and alpha_opt={} must lie in (0, 1)",
                self.alpha_emp, self.alpha_opt
            )));
        }
        if self.alpha_emp + self.alpha_opt >= 1.0 {
            return Err(Error::invalid(format!(
                "alpha_emp + alpha_opt = {} must be below 1",
                self.alpha_emp + self.alpha_opt
            )));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be positive, got {}", self.lambda)));
        }
        Ok(())
    }

    /// Uniform share `1 − α_emp − α_opt`.
    pub fn alpha_uniform(&self) -> f64 {
        1.0 - self.alpha_emp - self.alpha_opt
    }
}

fn exp_weight(neg_num: f64, denom: f64) -> f64 {
    let e = -neg_num / denom;
    if e < EXPONENT_FLOOR {
        f64::MIN_POSITIVE
    } else {
        e.exp()
    }
}

struct Estimates {
    emp_best: usize,
    gaps: Vec<f64>,
    beta: f64,
}

fn estimates(gram: &GramState, arms: &[ArmVector], conf: &ConfidenceParams) -> Result<Estimates> {
    check_arm_set(arms, gram.dim())?;
    let theta = gram.theta_hat();
    let means: Vec<f64> = arms.iter().map(|a| a.dot(theta)).collect();
    let emp_best = argmax(means.iter().copied());
    let gaps = means
        .iter()
        .map(|&m| (means[emp_best] - m).max(0.0))
        .collect();
    Ok(Estimates {
        emp_best,
        gaps,
        beta: gram.beta(conf)?,
    })
}

/// Full LinMED sampling distribution for one round.
pub fn linmed_distribution(
    gram: &GramState,
    arms: &[ArmVector],
    cfg: &LinMedConfig,
) -> Result<ActionDistribution> {
    cfg.validate()?;
    let Estimates {
        emp_best,
        gaps,
        beta,
    } = estimates(gram, arms, &cfg.confidence)?;
    let k = arms.len();
    let best = &arms[emp_best];

    let mut f = Vec::with_capacity(k);
    for (a, &gap) in arms.iter().zip(&gaps) {
        let dist = gram.mahalanobis_gap(best, a)?;
        f.push(if dist <= ZERO_GAP {
            1.0
        } else {
            exp_weight(gap * gap, beta * dist)
        });
    }

    let q_opt = match design_augmented(arms, &f, cfg.ver) {
        Ok(d) => d,
        // Only reachable when every surviving arm is the zero vector.
        Err(Error::InvalidArgument(_)) => Design::uniform(&(0..k).collect::<Vec<_>>()),
        Err(e) => return Err(e),
    };

    let uniform = cfg.alpha_uniform() / k as f64;
    let mut q: Vec<f64> = (0..k)
        .map(|i| cfg.alpha_opt * q_opt.weight(i) + uniform)
        .collect();
    q[emp_best] += cfg.alpha_emp;

    let denom: f64 = q.iter().zip(&f).map(|(q, f)| q * f).sum();
    let p_prime: Vec<f64> = q.iter().zip(&f).map(|(q, f)| q * f / denom).collect();

    let mut b_set = Vec::new();
    for (i, a) in arms.iter().enumerate() {
        if gram.leverage(a)? > 1.0 {
            b_set.push(i);
        }
    }
    let probs = match b_set.first() {
        None => p_prime.clone(),
        Some(&chosen) => {
            let mut p: Vec<f64> = p_prime.iter().map(|p| 0.5 * p).collect();
            p[chosen] += 0.5;
            p
        }
    };

    Ok(ActionDistribution {
        probs,
        f,
        q,
        p_prime,
        b_set,
        emp_best,
        gaps,
    })
}

/// Linear Maillard sampling without design mixing:
/// `p(a) ∝ exp(−Δ̂²_a / (β·‖a‖²_{V⁻¹}))`.
pub fn linmednopt_distribution(
    gram: &GramState,
    arms: &[ArmVector],
    conf: &ConfidenceParams,
) -> Result<ActionDistribution> {
    let Estimates {
        emp_best,
        gaps,
        beta,
    } = estimates(gram, arms, conf)?;
    let k = arms.len();
    let mut f = Vec::with_capacity(k);
    for (a, &gap) in arms.iter().zip(&gaps) {
        f.push(if gap == 0.0 {
            1.0
        } else {
            exp_weight(gap * gap, beta * gram.leverage(a)?)
        });
    }
    let total: f64 = f.iter().sum();
    let probs: Vec<f64> = f.iter().map(|w| w / total).collect();
    Ok(ActionDistribution {
        p_prime: probs.clone(),
        probs,
        f,
        q: vec![1.0 / k as f64; k],
        b_set: Vec::new(),
        emp_best,
        gaps,
    })
}

#[derive(Clone, Debug)]
pub struct LinMedPolicy {
    name: String,
    gram: GramState,
    cfg: LinMedConfig,
}

impl LinMedPolicy {
    pub fn new(name: impl Into<String>, dim: usize, cfg: LinMedConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            name: name.into(),
            gram: GramState::new(dim, cfg.lambda)?,
            cfg,
        })
    }

    pub fn gram(&self) -> &GramState {
        &self.gram
    }

    pub fn config(&self) -> &LinMedConfig {
        &self.cfg
    }

    pub fn distribution(&self, arms: &[ArmVector]) -> Result<ActionDistribution> {
        linmed_distribution(&self.gram, arms, &self.cfg)
    }
}

impl Policy for LinMedPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn decide(&mut self, arms: &[ArmVector], rng: &mut SimRng) -> Result<PolicyDecision> {
        let dist = self.distribution(arms)?;
        Ok(PolicyDecision::sampled(dist, rng))
    }

    fn observe(&mut self, arm: &ArmVector, reward: f64) -> Result<()> {
        self.gram.update(arm, reward)
    }
}

#[derive(Clone, Debug)]
pub struct LinMedNoptPolicy {
    gram: GramState,
    confidence: ConfidenceParams,
}

impl LinMedNoptPolicy {
    pub fn new(dim: usize, confidence: ConfidenceParams, lambda: f64) -> Result<Self> {
        Ok(Self {
            gram: GramState::new(dim, lambda)?,
            confidence,
        })
    }

    pub fn gram(&self) -> &GramState {
        &self.gram
    }
}

impl Policy for LinMedNoptPolicy {
    fn name(&self) -> &str {
        "LinMEDNOPT"
    }

    fn decide(&mut self, arms: &[ArmVector], rng: &mut SimRng) -> Result<PolicyDecision> {
        let dist = linmednopt_distribution(&self.gram, arms, &self.confidence)?;
        Ok(PolicyDecision::sampled(dist, rng))
    }

    fn observe(&mut self, arm: &ArmVector, reward: f64) -> Result<()> {
        self.gram.update(arm, reward)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DeltaSchedule;
    use rand::SeedableRng;

    fn arms(rows: &[&[f64]]) -> Vec<ArmVector> {
        rows.iter()
            .map(|r| ArmVector::new(r.to_vec()).unwrap())
            .collect()
    }

    fn conf() -> ConfidenceParams {
        ConfidenceParams::new(1.0, 1.0).unwrap()
    }

    fn cfg(emp: f64, opt: f64) -> LinMedConfig {
        LinMedConfig::new(emp, opt, conf(), 1.0).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(LinMedConfig::new(0.5, 0.5, conf(), 1.0).is_err());
        assert!(LinMedConfig::new(0.0, 0.5, conf(), 1.0).is_err());
        assert!(LinMedConfig::new(0.5, 0.2, conf(), 0.0).is_err());
        let p = LinMedConfig::preset("LinMED-90", conf(), 1.0).unwrap();
        assert_eq!((p.alpha_emp, p.alpha_opt), (0.90, 0.05));
        assert!(LinMedConfig::preset("LinMED-75", conf(), 1.0).is_err());
    }

    #[test]
    fn fresh_state_has_unit_weights() {
        let g = GramState::new(2, 1.0).unwrap();
        let a = arms(&[&[1.0, 0.0], &[0.0, 1.0], &[0.6, 0.8]]);
        let d = linmed_distribution(&g, &a, &cfg(0.5, 0.25)).unwrap();
        assert_eq!(d.f, vec![1.0; 3]);
        for (p, q) in d.p_prime.iter().zip(&d.q) {
            assert!((p - q).abs() < 1e-15);
        }
        // λ = 1: every unit arm has leverage exactly 1, which is not > 1.
        assert!(d.b_set.is_empty());
        assert_eq!(d.probs, d.p_prime);
    }

    #[test]
    fn small_lambda_triggers_forced_exploration() {
        let g = GramState::new(2, 0.5).unwrap();
        let a = arms(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let d = linmed_distribution(&g, &a, &cfg(0.5, 0.25)).unwrap();
        assert_eq!(d.b_set, vec![0, 1]);
        assert!((d.probs[0] - (0.5 * d.p_prime[0] + 0.5)).abs() < 1e-15);
        assert!((d.probs[1] - 0.5 * d.p_prime[1]).abs() < 1e-15);
    }

    #[test]
    fn empirical_best_gets_unit_weight_after_updates() {
        let mut g = GramState::new(2, 1.0).unwrap();
        let a = arms(&[&[1.0, 0.0], &[0.0, 1.0], &[0.7, 0.7]]);
        for (i, r) in [(0, 1.0), (1, -0.3), (2, 0.4), (0, 0.9)] {
            g.update(&a[i], r).unwrap();
        }
        let d = linmed_distribution(&g, &a, &cfg(0.9, 0.05)).unwrap();
        assert_eq!(d.emp_best, 0);
        assert_eq!(d.f[0], 1.0);
        assert!(d.f.iter().all(|&f| f > 0.0 && f <= 1.0));
        assert!(d.p_prime[0] >= 0.9);
        assert!((d.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_of_empirical_best_has_unit_weight() {
        let mut g = GramState::new(2, 1.0).unwrap();
        let a = arms(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 0.0]]);
        g.update(&a[0], 1.0).unwrap();
        g.update(&a[1], 0.0).unwrap();
        let d = linmed_distribution(&g, &a, &cfg(0.5, 0.25)).unwrap();
        assert_eq!(d.emp_best, 0);
        assert_eq!(d.f[2], 1.0);
    }

    #[test]
    fn nopt_two_arm_normalization() {
        // After one pull of e1 with reward 1: θ̂ = (1/2, 0), Δ̂ = (0, 1/2),
        // ‖e2‖²_{V⁻¹} = 1 and log-det ratio ln 2. With δ ≡ 1, σ = 0.1 and
        // S = 1/2 − 0.1·sqrt(ln 2) the radius is β = 1/4, so f₂ = e⁻¹.
        let mut g = GramState::new(2, 1.0).unwrap();
        let a = arms(&[&[1.0, 0.0], &[0.0, 1.0]]);
        g.update(&a[0], 1.0).unwrap();
        let s = 0.5 - 0.1 * 2f64.ln().sqrt();
        let params = ConfidenceParams::new(0.1, s)
            .unwrap()
            .with_delta(DeltaSchedule::Constant(1.0));
        assert!((g.beta(&params).unwrap() - 0.25).abs() < 1e-15);
        let d = linmednopt_distribution(&g, &a, &params).unwrap();
        let e = std::f64::consts::E;
        assert!((d.f[1] - 1.0 / e).abs() < 1e-14);
        assert!((d.probs[0] - e / (e + 1.0)).abs() < 1e-14);
        assert!((d.probs[1] - 1.0 / (e + 1.0)).abs() < 1e-14);
    }

    #[test]
    fn nopt_fresh_state_is_uniform() {
        let g = GramState::new(2, 1.0).unwrap();
        let a = arms(&[&[1.0, 0.0], &[0.0, 1.0], &[0.0, 1.0], &[0.0, 1.0]]);
        let d = linmednopt_distribution(&g, &a, &conf()).unwrap();
        assert_eq!(d.probs, vec![0.25; 4]);
    }

    #[test]
    fn nopt_splits_mass_evenly_across_duplicates() {
        let mut g = GramState::new(2, 1.0).unwrap();
        let a = arms(&[&[1.0, 0.0], &[0.0, 1.0], &[0.0, 1.0], &[0.0, 1.0]]);
        // θ̂ leaning towards the duplicated direction
        g.update(&a[0], -1.0).unwrap();
        g.update(&a[1], 0.5).unwrap();
        let d = linmednopt_distribution(&g, &a, &conf()).unwrap();
        assert_eq!(d.probs[1], d.probs[2]);
        assert_eq!(d.probs[2], d.probs[3]);
        assert!(d.probs[0] <= 0.25);
    }

    #[test]
    fn policy_is_seed_deterministic() {
        let a = arms(&[&[1.0, 0.0], &[0.0, 1.0], &[0.6, 0.8]]);
        let run = |seed| {
            let mut p = LinMedPolicy::new("x", 2, cfg(0.5, 0.25)).unwrap();
            let mut rng = SimRng::seed_from_u64(seed);
            (0..50)
                .map(|t| {
                    let d = p.decide(&a, &mut rng).unwrap();
                    p.observe(&a[d.arm_index], (t % 3) as f64 * 0.2).unwrap();
                    d.arm_index
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(9), run(9));
    }

    #[test]
    fn decision_propensity_matches_distribution() {
        let a = arms(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let mut p = LinMedPolicy::new("x", 2, cfg(0.5, 0.25)).unwrap();
        let mut rng = SimRng::seed_from_u64(1);
        for _ in 0..20 {
            let d = p.decide(&a, &mut rng).unwrap();
            let dist = d.distribution.as_ref().unwrap();
            assert_eq!(d.propensity, Some(dist.probs[d.arm_index]));
            p.observe(&a[d.arm_index], if d.arm_index == 0 { 1.0 } else { 0.0 })
                .unwrap();
        }
    }
}
