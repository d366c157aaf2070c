//! Quick invariant suites behind the `verify` subcommand.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};

use crate::design::{approx_design, design_cap, LEVERAGE_SLACK};
use crate::envs::{ope_instance, sample_unit_ball};
use crate::error::Result;
use crate::harness::config::{ExperimentConfig, InstanceSpec, PolicySpec};
use crate::harness::experiment::{run_experiment, write_regret_csv};
use crate::linalg::{ArmVector, ConfidenceParams, GramState};
use crate::ope::{ipw_estimate, uniform_target, LogRecord};
use crate::policies::{linmed_distribution, LinMedConfig, LINMED_PRESETS};
use crate::SimRng;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, run: impl FnOnce() -> Result<(bool, String)>) -> CheckResult {
    match run() {
        Ok((passed, detail)) => CheckResult { name, passed, detail },
        Err(e) => CheckResult {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

fn gram_consistency(seed: u64) -> Result<(bool, String)> {
    let mut rng = SimRng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let d = rng.random_range(1..=8);
        let lambda = rng.random_range(0.1..2.0);
        let mut g = GramState::new(d, lambda)?;
        let mut v = DMatrix::<f64>::identity(d, d) * lambda;
        let mut b = DVector::<f64>::zeros(d);
        for _ in 0..300 {
            let a = sample_unit_ball(d, &mut rng);
            let y: f64 = rng.random_range(-1.0..1.0);
            g.update(&a, y)?;
            v.ger(1.0, a.as_vector(), a.as_vector(), 1.0);
            b.axpy(y, a.as_vector(), 1.0);
        }
        let inv = v.clone().try_inverse().expect("ridge Gram matrix is invertible");
        let theta = &inv * &b;
        let logdet = v.determinant().ln() - d as f64 * lambda.ln();
        worst = worst
            .max(max_abs(&(g.gram_inverse() - &inv)))
            .max((g.theta_hat() - theta).amax())
            .max((g.log_det_ratio() - logdet).abs());
    }
    Ok((worst <= 1e-8, format!("max deviation {worst:.3e}")))
}

fn design_certificates(seed: u64) -> Result<(bool, String)> {
    let mut rng = SimRng::seed_from_u64(seed);
    let mut worst_ratio: f64 = 0.0;
    let mut ok = true;
    for d in 2..=6 {
        for k in [d, 3 * d, 40] {
            for _ in 0..10 {
                let arms: Vec<ArmVector> = (0..k).map(|_| sample_unit_ball(d, &mut rng)).collect();
                let (design, report) = approx_design(&arms)?;
                let mut m = DMatrix::<f64>::zeros(d, d);
                for &(i, w) in design.weights() {
                    m.ger(w, arms[i].as_vector(), arms[i].as_vector(), 1.0);
                }
                let inv = m.try_inverse().unwrap_or_else(|| DMatrix::zeros(d, d));
                let g = arms
                    .iter()
                    .map(|a| a.as_vector().dot(&(&inv * a.as_vector())))
                    .fold(0.0, f64::max);
                let tau = report.tau as f64;
                ok &= g <= tau * (1.0 + LEVERAGE_SLACK) + 1e-9 && report.tau <= design_cap(d);
                worst_ratio = worst_ratio.max(tau / (d as f64 * (d as f64).ln()));
            }
        }
    }
    Ok((ok, format!("max tau/(d ln d) {worst_ratio:.3}")))
}

fn linmed_invariants(seed: u64) -> Result<(bool, String)> {
    let mut rng = SimRng::seed_from_u64(seed);
    let mut ok = true;
    let mut min_p = f64::INFINITY;
    for _ in 0..500 {
        let d = rng.random_range(1..=5);
        let k = rng.random_range(1..=12);
        let arms: Vec<ArmVector> = (0..k).map(|_| sample_unit_ball(d, &mut rng)).collect();
        let mut g = GramState::new(d, rng.random_range(0.2..2.0))?;
        for _ in 0..rng.random_range(0..40) {
            let a = &arms[rng.random_range(0..k)];
            g.update(a, rng.random_range(-1.0..1.0))?;
        }
        let conf = ConfidenceParams::new(rng.random_range(0.05..2.0), 1.0)?;
        for (name, _, _) in LINMED_PRESETS {
            let cfg = LinMedConfig::preset(name, conf, g.lambda())?;
            let dist = linmed_distribution(&g, &arms, &cfg)?;
            let sum: f64 = dist.probs.iter().sum();
            let low = dist.probs.iter().copied().fold(f64::INFINITY, f64::min);
            min_p = min_p.min(low);
            ok &= (sum - 1.0).abs() <= 1e-9
                && dist.f[dist.emp_best] == 1.0
                && dist.p_prime[dist.emp_best] >= cfg.alpha_emp
                && low > 0.0;
        }
    }
    Ok((ok, format!("smallest probability {min_p:.3e}")))
}

fn ipw_smoke() -> Result<(bool, String)> {
    let rec = |round, arm_index, propensity, reward| LogRecord {
        round,
        arm_index,
        propensity,
        reward,
        mc_samples: None,
    };
    let log = [rec(1, 0, 0.5, 1.0), rec(2, 1, 0.5, 0.6)];
    let est = ipw_estimate(&log, uniform_target(2))?.estimate;
    let oracle = crate::ope::oracle_value(&[0.5, 0.5], &ope_instance())?;
    let poisoned = ipw_estimate(&[rec(1, 0, 0.0, 1.0)], uniform_target(2)).is_err();
    Ok((
        (est - 0.8).abs() < 1e-12 && (oracle - 0.8).abs() < 1e-12 && poisoned,
        format!("estimate {est}, oracle {oracle}"),
    ))
}

fn determinism(seed: u64) -> Result<(bool, String)> {
    let mut cfg = ExperimentConfig::new(
        InstanceSpec::named("end-of-optimism"),
        vec![
            PolicySpec::named("LinMED-90"),
            PolicySpec::named("OFUL"),
            PolicySpec::named("LinTS-Freq"),
        ],
        300,
    );
    cfg.trials = 4;
    cfg.master_seed = seed;
    cfg.delay = 3;
    let render = |threads| -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        write_regret_csv(&mut buf, &run_experiment(&cfg, Some(threads))?)?;
        Ok(buf)
    };
    let same = render(1)? == render(4)?;
    Ok((same, "1 vs 4 threads".into()))
}

/// Runs every suite; all of them finish within a few seconds.
pub fn run_all(seed: u64) -> Vec<CheckResult> {
    vec![
        check("gram-consistency", || gram_consistency(seed)),
        check("design-certificates", || design_certificates(seed)),
        check("linmed-invariants", || linmed_invariants(seed)),
        check("ipw-smoke", ipw_smoke),
        check("determinism", || determinism(seed)),
    ]
}
