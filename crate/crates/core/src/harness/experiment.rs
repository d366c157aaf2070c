//! Seeded, parallel experiment runs with deterministic aggregation.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harness::config::{build_policy, ExperimentConfig};
use crate::harness::seed::trial_seed;
use crate::harness::sim::simulate;
use crate::ope::{ipw_estimate, log_run, oracle_value, uniform_target, write_estimates};

/// Thread count override read by the CLI.
pub const THREADS_ENV: &str = "LINMED_THREADS";

#[derive(Clone, Debug, PartialEq)]
pub struct RegretCurve {
    pub policy: String,
    pub checkpoints: Vec<usize>,
    pub mean_regret: Vec<f64>,
    pub stderr: Vec<f64>,
    pub trials: usize,
}

impl RegretCurve {
    pub fn final_mean(&self) -> f64 {
        self.mean_regret.last().copied().unwrap_or(0.0)
    }

    pub fn final_stderr(&self) -> f64 {
        self.stderr.last().copied().unwrap_or(0.0)
    }
}

/// Up to `count` distinct rounds in `1..=horizon`, log-spaced, always ending
/// at `horizon`.
pub fn checkpoints(horizon: usize, count: usize) -> Vec<usize> {
    if horizon == 0 || count == 0 {
        return Vec::new();
    }
    if count == 1 {
        return vec![horizon];
    }
    let top = (horizon as f64).ln();
    let mut out: Vec<usize> = (0..count)
        .map(|i| ((top * i as f64 / (count - 1) as f64).exp().round() as usize).clamp(1, horizon))
        .collect();
    out.dedup();
    *out.last_mut().expect("count ≥ 2") = horizon;
    out.dedup();
    out
}

/// Runs `job` over `0..len` on a pool of `threads` workers (all cores when
/// `None`), returning results in index order.
fn parallel<T, F>(threads: Option<usize>, len: usize, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Internal {
            message: "could not start worker threads".into(),
            report: e.to_string(),
        })?;
    pool.install(|| (0..len).into_par_iter().map(job).collect())
}

fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Simulates every `(policy, trial)` pair and aggregates cumulative regret
/// at log-spaced checkpoints.
pub fn run_experiment(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<Vec<RegretCurve>> {
    cfg.validate()?;
    let marks = checkpoints(cfg.horizon, cfg.checkpoints);
    let shared = if cfg.instance_varies_by_trial() {
        None
    } else {
        Some(cfg.build_instance(0)?)
    };
    let jobs = cfg.policies.len() * cfg.trials;
    let runs = parallel(threads, jobs, |job| {
        let (ordinal, trial) = (job / cfg.trials, job % cfg.trials);
        let own;
        let instance = match &shared {
            Some(inst) => inst,
            None => {
                own = cfg.build_instance(trial)?;
                &own
            }
        };
        let mut policy = build_policy(&cfg.policies[ordinal], instance, cfg.horizon, false)?;
        let mut cumulative = 0.0;
        let mut curve = Vec::with_capacity(marks.len());
        let mut next = 0;
        simulate(
            policy.as_mut(),
            instance,
            cfg.horizon,
            cfg.delay,
            trial_seed(cfg.master_seed, ordinal, trial),
            |r| {
                cumulative += r.outcome.instant_regret;
                if next < marks.len() && marks[next] == r.round {
                    curve.push(cumulative);
                    next += 1;
                }
            },
        )?;
        Ok((policy.name().to_string(), curve))
    })?;

    let mut curves = Vec::with_capacity(cfg.policies.len());
    for per_policy in runs.chunks(cfg.trials) {
        let mut mean_regret = Vec::with_capacity(marks.len());
        let mut stderr = Vec::with_capacity(marks.len());
        for i in 0..marks.len() {
            let column: Vec<f64> = per_policy.iter().map(|(_, c)| c[i]).collect();
            let (m, s) = mean_and_std(&column);
            mean_regret.push(m);
            stderr.push(s / (cfg.trials as f64).sqrt());
        }
        curves.push(RegretCurve {
            policy: per_policy[0].0.clone(),
            checkpoints: marks.clone(),
            mean_regret,
            stderr,
            trials: cfg.trials,
        });
    }
    Ok(curves)
}

pub fn write_regret_csv<W: Write>(writer: W, curves: &[RegretCurve]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["policy", "t", "mean_regret", "stderr", "trials"])?;
    for c in curves {
        for i in 0..c.checkpoints.len() {
            w.write_record([
                c.policy.clone(),
                c.checkpoints[i].to_string(),
                c.mean_regret[i].to_string(),
                c.stderr[i].to_string(),
                c.trials.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct OpeSummary {
    pub policy: String,
    pub trials: usize,
    /// Trials whose log holds a zero propensity and therefore no estimate.
    pub poisoned_trials: usize,
    pub mean: f64,
    pub std: f64,
    pub oracle: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OpeOutcome {
    pub summary: OpeSummary,
    /// `(trial, estimate)` for every trial with a defined estimate.
    pub estimates: Vec<(usize, f64)>,
}

/// Logs each configured policy and estimates the uniform policy's value by
/// IPW, once per trial.
pub fn run_ope(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<Vec<OpeOutcome>> {
    cfg.validate()?;
    let shared = if cfg.instance_varies_by_trial() {
        None
    } else {
        Some(cfg.build_instance(0)?)
    };
    let jobs = cfg.policies.len() * cfg.trials;
    let runs = parallel(threads, jobs, |job| {
        let (ordinal, trial) = (job / cfg.trials, job % cfg.trials);
        let own;
        let instance = match &shared {
            Some(inst) => inst,
            None => {
                own = cfg.build_instance(trial)?;
                &own
            }
        };
        let arms = instance.fixed_arms().ok_or_else(|| {
            Error::Unsupported("off-policy evaluation needs a fixed arm set".into())
        })?;
        let k = arms.len();
        let oracle = oracle_value(&vec![1.0 / k as f64; k], instance)?;
        let mut policy = build_policy(&cfg.policies[ordinal], instance, cfg.horizon, true)?;
        let log = log_run(
            policy.as_mut(),
            instance,
            cfg.horizon,
            trial_seed(cfg.master_seed, ordinal, trial),
        )?;
        let estimate = match ipw_estimate(&log, uniform_target(k)) {
            Ok(r) => Some(r.estimate),
            Err(Error::EstimatorUndefined { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok((policy.name().to_string(), estimate, oracle))
    })?;

    Ok(runs
        .chunks(cfg.trials)
        .map(|per_policy| {
            let estimates: Vec<(usize, f64)> = per_policy
                .iter()
                .enumerate()
                .filter_map(|(t, (_, e, _))| e.map(|e| (t, e)))
                .collect();
            let values: Vec<f64> = estimates.iter().map(|&(_, e)| e).collect();
            let (mean, std) = if values.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                mean_and_std(&values)
            };
            let oracle = per_policy.iter().map(|(_, _, o)| o).sum::<f64>() / cfg.trials as f64;
            OpeOutcome {
                summary: OpeSummary {
                    policy: per_policy[0].0.clone(),
                    trials: cfg.trials,
                    poisoned_trials: cfg.trials - estimates.len(),
                    mean,
                    std,
                    oracle,
                },
                estimates,
            }
        })
        .collect())
}

pub fn write_ope_summary_csv<W: Write>(writer: W, outcomes: &[OpeOutcome]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["policy", "trials", "poisoned_trials", "mean", "std", "oracle"])?;
    for o in outcomes {
        let s = &o.summary;
        w.write_record([
            s.policy.clone(),
            s.trials.to_string(),
            s.poisoned_trials.to_string(),
            s.mean.to_string(),
            s.std.to_string(),
            s.oracle.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn file_slug(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

fn create(dir: &Path, name: &str) -> Result<std::io::BufWriter<std::fs::File>> {
    let path = dir.join(name);
    let file = std::fs::File::create(&path).map_err(|e| Error::file(&path, e))?;
    Ok(std::io::BufWriter::new(file))
}

fn prepare_dir(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    let mut w = create(dir, "config.toml")?;
    w.write_all(cfg.to_toml_string()?.as_bytes())?;
    w.flush()?;
    Ok(())
}

/// Runs the experiment and writes `regret.csv` plus the canonical config
/// into `dir`; returns the paths written.
pub fn run_experiment_to_dir(
    cfg: &ExperimentConfig,
    threads: Option<usize>,
    dir: &Path,
) -> Result<(Vec<RegretCurve>, Vec<PathBuf>)> {
    let curves = run_experiment(cfg, threads)?;
    prepare_dir(cfg, dir)?;
    write_regret_csv(create(dir, "regret.csv")?, &curves)?;
    Ok((curves, vec![dir.join("config.toml"), dir.join("regret.csv")]))
}

/// Runs off-policy evaluation and writes `ope_summary.csv` plus one
/// `ope_<policy>.csv` of per-trial estimates for each logging policy.
pub fn run_ope_to_dir(
    cfg: &ExperimentConfig,
    threads: Option<usize>,
    dir: &Path,
) -> Result<(Vec<OpeOutcome>, Vec<PathBuf>)> {
    let outcomes = run_ope(cfg, threads)?;
    prepare_dir(cfg, dir)?;
    let mut written = vec![dir.join("config.toml")];
    write_ope_summary_csv(create(dir, "ope_summary.csv")?, &outcomes)?;
    written.push(dir.join("ope_summary.csv"));
    for (i, o) in outcomes.iter().enumerate() {
        let name = format!("ope_{}_{}.csv", i, file_slug(&o.summary.policy));
        write_estimates(create(dir, &name)?, &o.estimates)?;
        written.push(dir.join(name));
    }
    Ok((outcomes, written))
}
