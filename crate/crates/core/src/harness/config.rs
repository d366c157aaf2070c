//! Experiment configuration: a TOML document naming an instance, one or more
//! policies and the run parameters.
//!
//! ```toml
//! horizon = 10000
//! trials = 20
//! master_seed = 7
//! delay = 0
//! output_dir = "out"
//! checkpoints = 100
//!
//! [instance]
//! name = "end-of-optimism"
//! epsilon = 0.01
//!
//! [[policies]]
//! name = "LinMED-90"
//!
//! [[policies]]
//! name = "LinTS-Freq"
//! mc_samples = 1000
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::design::AugmentVersion;
use crate::envs::{self, Instance};
use crate::error::{Error, Result};
use crate::harness::seed::instance_seed;
use crate::linalg::ConfidenceParams;
use crate::policies::{
    Exp2Policy, LinMedConfig, LinMedNoptPolicy, LinMedPolicy, LinTsPolicy, LinTsVariant,
    OfulPolicy, Policy,
};

pub const INSTANCE_NAMES: [&str; 7] = [
    "large-gap",
    "end-of-optimism",
    "k-dependency",
    "unit-ball",
    "unit-ball-per-round",
    "ope",
    "csv",
];

pub const POLICY_NAMES: [&str; 9] = [
    "LinMED-99",
    "LinMED-90",
    "LinMED-50",
    "LinMED",
    "LinMEDNOPT",
    "OFUL",
    "LinTS-Freq",
    "LinTS-Bayes",
    "EXP2",
];

/// Monte-Carlo draws used for Thompson propensities when logging without an
/// explicit `mc_samples`.
pub const DEFAULT_MC_SAMPLES: usize = 1000;

pub const MC_SAMPLE_PRESETS: [usize; 3] = [1_000, 10_000, 100_000];

fn default_trials() -> usize {
    1
}

fn default_output_dir() -> String {
    "out".into()
}

fn default_checkpoints() -> usize {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub horizon: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub delay: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
    pub instance: InstanceSpec,
    pub policies: Vec<PolicySpec>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    /// Fixes a random instance across trials; otherwise each trial draws its own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_star_sq: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalize: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_star: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_emp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_opt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ver: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

impl InstanceSpec {
    pub fn named(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Self::default()
        }
    }
}

impl PolicySpec {
    pub fn named(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Self::default()
        }
    }
}

fn lookup<'a>(kind: &str, name: &str, valid: &[&'a str]) -> Result<&'a str> {
    valid
        .iter()
        .copied()
        .find(|v| v.eq_ignore_ascii_case(name))
        .ok_or_else(|| {
            Error::Config(format!(
                "unknown {kind} '{name}'; valid names: {}",
                valid.join(", ")
            ))
        })
}

impl ExperimentConfig {
    pub fn new(instance: InstanceSpec, policies: Vec<PolicySpec>, horizon: usize) -> Self {
        Self {
            horizon,
            trials: default_trials(),
            master_seed: 0,
            delay: 0,
            output_dir: default_output_dir(),
            checkpoints: default_checkpoints(),
            instance,
            policies,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Canonical text form; parsing it back yields an equal config.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.trials == 0 || self.checkpoints == 0 {
            return Err(Error::Config(
                "horizon, trials and checkpoints must be positive".into(),
            ));
        }
        lookup("instance", &self.instance.name, &INSTANCE_NAMES)?;
        if self.policies.is_empty() {
            return Err(Error::Config(format!(
                "no policies configured; valid names: {}",
                POLICY_NAMES.join(", ")
            )));
        }
        for p in &self.policies {
            lookup("policy", &p.name, &POLICY_NAMES)?;
        }
        Ok(())
    }

    /// Whether each trial runs on its own randomly drawn instance.
    pub fn instance_varies_by_trial(&self) -> bool {
        matches!(
            lookup("instance", &self.instance.name, &INSTANCE_NAMES),
            Ok("unit-ball" | "unit-ball-per-round")
        ) && self.instance.seed.is_none()
    }

    /// The instance used by `trial`.
    pub fn build_instance(&self, trial: usize) -> Result<Instance> {
        build_instance(&self.instance, instance_seed(self.master_seed, trial))
    }
}

fn require<T: Copy>(value: Option<T>, key: &str, name: &str) -> Result<T> {
    value.ok_or_else(|| Error::Config(format!("instance '{name}' needs '{key}'")))
}

/// Builds an instance; `fallback_seed` is used by random instances without a
/// `seed` of their own.
pub fn build_instance(spec: &InstanceSpec, fallback_seed: u64) -> Result<Instance> {
    let name = lookup("instance", &spec.name, &INSTANCE_NAMES)?;
    let seed = spec.seed.unwrap_or(fallback_seed);
    let inst = match name {
        "large-gap" => envs::large_gap_instance(),
        "end-of-optimism" => envs::end_of_optimism_instance(spec.epsilon.unwrap_or(0.01))?,
        "k-dependency" => envs::k_dependency_instance(require(spec.k, "k", name)?)?,
        "unit-ball" => envs::unit_ball_instance(
            require(spec.d, "d", name)?,
            require(spec.k, "k", name)?,
            seed,
        )?,
        "unit-ball-per-round" => envs::unit_ball_per_round_instance(
            require(spec.d, "d", name)?,
            require(spec.k, "k", name)?,
            seed,
        )?,
        "ope" => envs::ope_instance(),
        "csv" => {
            let path = spec
                .path
                .as_ref()
                .ok_or_else(|| Error::Config("instance 'csv' needs 'path'".into()))?;
            let arms = envs::load_arms_csv(path, spec.normalize.unwrap_or(false))?;
            let theta = spec
                .theta_star
                .clone()
                .ok_or_else(|| Error::Config("instance 'csv' needs 'theta_star'".into()))?;
            Instance::new("csv", theta, 1.0, envs::ArmSource::Fixed(arms))?
        }
        _ => unreachable!("name comes from INSTANCE_NAMES"),
    };
    match spec.sigma_star_sq {
        Some(s) => inst.with_sigma_star_sq(s),
        None => Ok(inst),
    }
}

/// Builds a fresh policy for `instance`.
///
/// Unless overridden, `σ` is the instance's true noise scale (1 for noiseless
/// instances), `S = 1` and `λ = 1`. With `logging` set, Thompson sampling
/// estimates propensities with [`DEFAULT_MC_SAMPLES`] draws by default.
pub fn build_policy(
    spec: &PolicySpec,
    instance: &Instance,
    horizon: usize,
    logging: bool,
) -> Result<Box<dyn Policy>> {
    let name = lookup("policy", &spec.name, &POLICY_NAMES)?;
    let dim = instance.dim();
    let lambda = spec.lambda.unwrap_or(1.0);
    let true_sigma = instance.sigma_star_sq().sqrt();
    let sigma = spec
        .sigma
        .unwrap_or(if true_sigma > 0.0 { true_sigma } else { 1.0 });
    let conf = ConfidenceParams::new(sigma, spec.s.unwrap_or(1.0))?;
    let ver = AugmentVersion::from_index(spec.ver.unwrap_or(0))?;
    let policy: Box<dyn Policy> = match name {
        "LinMED" => {
            let (emp, opt) = match (spec.alpha_emp, spec.alpha_opt) {
                (Some(e), Some(o)) => (e, o),
                _ => {
                    return Err(Error::Config(
                        "policy 'LinMED' needs 'alpha_emp' and 'alpha_opt'".into(),
                    ))
                }
            };
            let cfg = LinMedConfig::new(emp, opt, conf, lambda)?.with_version(ver);
            Box::new(LinMedPolicy::new(format!("LinMED({emp},{opt})"), dim, cfg)?)
        }
        preset if preset.starts_with("LinMED-") => {
            let cfg = LinMedConfig::preset(preset, conf, lambda)?.with_version(ver);
            Box::new(LinMedPolicy::new(preset, dim, cfg)?)
        }
        "LinMEDNOPT" => Box::new(LinMedNoptPolicy::new(dim, conf, lambda)?),
        "OFUL" => Box::new(OfulPolicy::new(dim, conf, lambda)?),
        "LinTS-Freq" | "LinTS-Bayes" => {
            let variant = if name == "LinTS-Freq" {
                LinTsVariant::Freq
            } else {
                LinTsVariant::Bayes
            };
            let ts = LinTsPolicy::new(dim, variant, conf, lambda)?;
            match spec.mc_samples.or(logging.then_some(DEFAULT_MC_SAMPLES)) {
                Some(m) => Box::new(ts.with_propensity_samples(m)),
                None => Box::new(ts),
            }
        }
        "EXP2" => Box::new(Exp2Policy::new(dim, horizon)?.with_parameters(spec.gamma, spec.eta)),
        _ => unreachable!("name comes from POLICY_NAMES"),
    };
    Ok(policy)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
horizon = 500
trials = 3
master_seed = 11

[instance]
name = "end-of-optimism"
epsilon = 0.02

[[policies]]
name = "LinMED-90"

[[policies]]
name = "linmed"
alpha_emp = 0.1
alpha_opt = 0.8
ver = 1
"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(cfg.horizon, 500);
        assert_eq!(cfg.delay, 0);
        assert_eq!(cfg.checkpoints, 100);
        assert_eq!(cfg.output_dir, "out");
        assert_eq!(cfg.instance.epsilon, Some(0.02));
        assert_eq!(cfg.policies.len(), 2);
        let inst = cfg.build_instance(0).unwrap();
        assert_eq!(inst.fixed_arms().unwrap().len(), 3);
        let p = build_policy(&cfg.policies[1], &inst, cfg.horizon, false).unwrap();
        assert_eq!(p.name(), "LinMED(0.1,0.8)");
    }

    #[test]
    fn canonical_form_round_trips() {
        let cfg = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        let text = cfg.to_toml_string().unwrap();
        let again = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.to_toml_string().unwrap(), text);
    }

    #[test]
    fn unknown_names_list_the_valid_ones() {
        let bad = SAMPLE.replace("LinMED-90", "UCB");
        match ExperimentConfig::from_toml_str(&bad) {
            Err(Error::Config(msg)) => {
                assert!(msg.contains("UCB"));
                assert!(msg.contains("LinMEDNOPT") && msg.contains("EXP2"));
            }
            other => panic!("expected config error, got {other:?}"),
        }
        let bad = SAMPLE.replace("end-of-optimism", "movielens");
        match ExperimentConfig::from_toml_str(&bad) {
            Err(Error::Config(msg)) => assert!(msg.contains("large-gap")),
            other => panic!("expected config error, got {other:?}"),
        }
        assert!(ExperimentConfig::from_toml_str("horizon = 1\nbogus = 2\n[instance]\nname=\"ope\"\n").is_err());
    }

    #[test]
    fn missing_file_is_a_file_error() {
        assert!(matches!(
            ExperimentConfig::load("/nonexistent/missing.toml"),
            Err(Error::File { .. })
        ));
    }

    #[test]
    fn random_instances_vary_by_trial_unless_seeded() {
        let mut cfg = ExperimentConfig::new(
            InstanceSpec {
                d: Some(3),
                k: Some(5),
                ..InstanceSpec::named("unit-ball")
            },
            vec![PolicySpec::named("OFUL")],
            10,
        );
        assert!(cfg.instance_varies_by_trial());
        assert_ne!(cfg.build_instance(0).unwrap(), cfg.build_instance(1).unwrap());
        cfg.instance.seed = Some(4);
        assert!(!cfg.instance_varies_by_trial());
        assert_eq!(cfg.build_instance(0).unwrap(), cfg.build_instance(1).unwrap());
    }

    #[test]
    fn every_policy_builds() {
        let inst = envs::large_gap_instance();
        for name in POLICY_NAMES {
            let mut spec = PolicySpec::named(name);
            if name == "LinMED" {
                spec.alpha_emp = Some(0.2);
                spec.alpha_opt = Some(0.3);
            }
            build_policy(&spec, &inst, 100, true).unwrap();
        }
        assert!(build_policy(&PolicySpec::named("LinMED"), &inst, 100, false).is_err());
    }
}
