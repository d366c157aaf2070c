use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use linmed::envs::DelayQueue;
use linmed::harness::{checkpoints, ExperimentConfig, InstanceSpec, PolicySpec};
use linmed::ope::write_log;
use linmed::ope::read_log;
use linmed::policies::{linmed_distribution, LinMedConfig};
use linmed::{approx_design, ipw_estimate, ArmVector, ConfidenceParams, GramState, LogRecord};

fn arm_strategy(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, d).prop_map(|v| {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1.0 {
            v.iter().map(|x| x / norm).collect()
        } else {
            v
        }
    })
}

fn gram_case() -> impl Strategy<Value = (usize, f64, Vec<(Vec<f64>, f64)>)> {
    (1usize..6, 0.1f64..5.0).prop_flat_map(|(d, lambda)| {
        (
            Just(d),
            Just(lambda),
            prop::collection::vec((arm_strategy(d), -2.0f64..2.0), 0..80),
        )
    })
}

fn arm_set(d: usize, k: std::ops::Range<usize>) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(arm_strategy(d), k)
}

fn to_arms(rows: &[Vec<f64>]) -> Vec<ArmVector> {
    rows.iter().map(|r| ArmVector::new(r.clone()).unwrap()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 64,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn gram_state_matches_batch_solution((d, lambda, steps) in gram_case()) {
        let mut g = GramState::new(d, lambda).unwrap();
        let mut v = DMatrix::<f64>::identity(d, d) * lambda;
        let mut b = DVector::<f64>::zeros(d);
        for (x, r) in &steps {
            g.update(&ArmVector::new(x.clone()).unwrap(), *r).unwrap();
            let x = DVector::from_column_slice(x);
            v += &x * x.transpose();
            b += &x * *r;
        }
        let chol = v.clone().cholesky().unwrap();
        let inv = chol.inverse();
        let theta = chol.solve(&b);
        let ldr = 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>() - d as f64 * lambda.ln();
        let scale = 1.0 + v.amax();
        prop_assert!((g.gram_inverse() - &inv).amax() < 1e-9 * scale);
        prop_assert!((g.theta_hat() - &theta).amax() < 1e-8 * (1.0 + theta.amax()));
        prop_assert!((g.log_det_ratio() - ldr).abs() < 1e-8 * (1.0 + ldr.abs()));
        prop_assert_eq!(g.rounds(), steps.len() as u64);
    }

    #[test]
    fn leverage_never_increases(
        (d, x, updates) in (1usize..6).prop_flat_map(|d| (
            Just(d),
            arm_strategy(d),
            prop::collection::vec(arm_strategy(d), 1..30),
        ))
    ) {
        let mut g = GramState::new(d, 1.0).unwrap();
        let probe = ArmVector::new(x).unwrap();
        let mut last = g.leverage(&probe).unwrap();
        for u in updates {
            g.update(&ArmVector::new(u).unwrap(), 0.0).unwrap();
            let now = g.leverage(&probe).unwrap();
            prop_assert!(now <= last + 1e-12, "{} > {}", now, last);
            prop_assert!(now >= 0.0);
            last = now;
        }
    }

    #[test]
    fn linmed_distribution_is_a_valid_mixture(
        (rows, history, preset) in (1usize..5).prop_flat_map(|d| (
            arm_set(d, 1..12),
            prop::collection::vec((arm_strategy(d), -1.0f64..1.0), 0..40),
            0usize..3,
        ))
    ) {
        let d = rows[0].len();
        let arms = to_arms(&rows);
        let mut g = GramState::new(d, 1.0).unwrap();
        for (x, r) in history {
            g.update(&ArmVector::new(x).unwrap(), r).unwrap();
        }
        let name = ["LinMED-99", "LinMED-90", "LinMED-50"][preset];
        let cfg = LinMedConfig::preset(name, ConfidenceParams::new(1.0, 1.0).unwrap(), 1.0).unwrap();
        let dist = linmed_distribution(&g, &arms, &cfg).unwrap();
        let total: f64 = dist.probs.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        prop_assert!(dist.probs.iter().all(|&p| p > 0.0 && p.is_finite()));
        prop_assert!(dist.f.iter().all(|&f| f > 0.0 && f <= 1.0));
        prop_assert!((dist.q.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(dist.q[dist.emp_best] >= cfg.alpha_emp - 1e-12);
        prop_assert_eq!(dist.f[dist.emp_best], 1.0);
        if dist.b_set.is_empty() {
            prop_assert_eq!(&dist.probs, &dist.p_prime);
        } else {
            prop_assert!(dist.probs[dist.b_set[0]] >= 0.5);
        }
    }

    #[test]
    fn design_is_invariant_to_rescaling_the_arm_set(
        rows in (1usize..5).prop_flat_map(|d| arm_set(d, 1..15)),
        c in 0.05f64..1.0,
    ) {
        prop_assume!(rows.iter().any(|r| r.iter().any(|x| x.abs() > 1e-3)));
        let arms = to_arms(&rows);
        let scaled: Vec<ArmVector> = arms.iter().map(|a| a.scaled(c)).collect();
        let (w1, r1) = approx_design(&arms).unwrap();
        let (w2, r2) = approx_design(&scaled).unwrap();
        prop_assert!((r1.max_leverage - r2.max_leverage).abs() < 1e-6 * (1.0 + r1.max_leverage));
        prop_assert!(r1.max_leverage <= r1.tau as f64 * (1.0 + 1e-9));
        let (d1, d2) = (w1.to_dense(arms.len()), w2.to_dense(arms.len()));
        let total: f64 = d1.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        prop_assert!(d2.iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn delay_queue_releases_everything_once_in_order(
        delay in 0usize..30,
        horizon in 1usize..200,
    ) {
        let mut q = DelayQueue::new(delay);
        let mut seen = Vec::new();
        for t in 1..=horizon {
            q.push(t, t);
            for item in q.release(t) {
                prop_assert!(item + delay <= t);
                seen.push(item);
            }
        }
        seen.extend(q.drain());
        prop_assert!(q.is_empty());
        prop_assert_eq!(seen, (1..=horizon).collect::<Vec<_>>());
    }

    #[test]
    fn checkpoints_are_increasing_and_end_at_horizon(horizon in 1usize..100_000, count in 1usize..300) {
        let cps = checkpoints(horizon, count);
        prop_assert!(!cps.is_empty() && cps.len() <= count);
        prop_assert!(cps.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(cps[0] >= 1);
        prop_assert_eq!(*cps.last().unwrap(), horizon);
    }

    #[test]
    fn config_round_trips_through_toml(
        horizon in 1usize..1_000_000,
        trials in 1usize..100,
        seed in any::<u64>(),
        delay in 0usize..50,
        eps in prop::option::of(0.01f64..0.49),
        sigma in prop::option::of(0.01f64..5.0),
        mc in prop::option::of(1usize..5000),
    ) {
        let mut cfg = ExperimentConfig::new(
            InstanceSpec { epsilon: eps, ..InstanceSpec::named("end-of-optimism") },
            vec![
                PolicySpec { sigma, ..PolicySpec::named("OFUL") },
                PolicySpec { mc_samples: mc, ..PolicySpec::named("LinTS-Freq") },
            ],
            horizon,
        );
        cfg.trials = trials;
        cfg.master_seed = seed;
        cfg.delay = delay;
        let text = cfg.to_toml_string().unwrap();
        prop_assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn log_csv_round_trips(
        records in prop::collection::vec(
            (0usize..50, 0.0f64..=1.0, -10.0f64..10.0, prop::option::of(1usize..10_000)),
            1..40,
        )
    ) {
        let log: Vec<LogRecord> = records
            .into_iter()
            .enumerate()
            .map(|(i, (arm_index, propensity, reward, mc_samples))| LogRecord {
                round: i + 1,
                arm_index,
                propensity,
                reward,
                mc_samples,
            })
            .collect();
        let mut buf = Vec::new();
        write_log(&mut buf, &log).unwrap();
        let back = read_log(buf.as_slice()).unwrap();
        prop_assert_eq!(back.len(), log.len());
        for (a, b) in back.iter().zip(&log) {
            prop_assert_eq!((a.round, a.arm_index), (b.round, b.arm_index));
            prop_assert_eq!(a.propensity, b.propensity);
            prop_assert_eq!(a.reward, b.reward);
        }
    }

    #[test]
    fn ipw_is_linear_in_rewards(
        rows in prop::collection::vec((0.01f64..=1.0, -5.0f64..5.0, -5.0f64..5.0), 1..50),
        a in -3.0f64..3.0,
    ) {
        let make = |pick: &dyn Fn(&(f64, f64, f64)) -> f64| -> Vec<LogRecord> {
            rows.iter()
                .enumerate()
                .map(|(i, row)| LogRecord {
                    round: i + 1,
                    arm_index: i % 3,
                    propensity: row.0,
                    reward: pick(row),
                    mc_samples: None,
                })
                .collect()
        };
        let target = |_: usize, arm: usize| [0.2, 0.3, 0.5][arm];
        let x = ipw_estimate(&make(&|r| r.1), target).unwrap().estimate;
        let y = ipw_estimate(&make(&|r| r.2), target).unwrap().estimate;
        let z = ipw_estimate(&make(&|r| r.1 + a * r.2), target).unwrap().estimate;
        prop_assert!((z - (x + a * y)).abs() < 1e-9 * (1.0 + z.abs()));
    }
}
