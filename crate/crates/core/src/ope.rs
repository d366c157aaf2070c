//! Logged interaction data and inverse-propensity-weighted estimates.

use std::io::{Read, Write};
use std::path::Path;

use crate::envs::{ArmSource, Instance};
use crate::error::{Error, Result};
use crate::harness::sim::simulate;
use crate::policies::Policy;

/// One logged round.
#[derive(Clone, Debug, PartialEq)]
pub struct LogRecord {
    pub round: usize,
    pub arm_index: usize,
    pub propensity: f64,
    pub reward: f64,
    /// Number of Monte-Carlo draws behind `propensity`, when it is estimated.
    pub mc_samples: Option<usize>,
}

impl LogRecord {
    /// A record whose propensity makes any IPW estimate undefined.
    pub fn is_poisoned(&self) -> bool {
        self.propensity.is_nan() || self.propensity <= 0.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IpwResult {
    pub estimate: f64,
    pub n: usize,
    pub per_record_weights: Vec<f64>,
}

/// Runs `policy` for `n` rounds and logs the propensity of every chosen arm.
pub fn log_run(
    policy: &mut dyn Policy,
    instance: &Instance,
    n: usize,
    seed: u64,
) -> Result<Vec<LogRecord>> {
    let mut log = Vec::with_capacity(n);
    let mut missing = None;
    simulate(policy, instance, n, 0, seed, |r| match r.decision.propensity {
        Some(propensity) => log.push(LogRecord {
            round: r.round,
            arm_index: r.decision.arm_index,
            propensity,
            reward: r.outcome.reward,
            mc_samples: r.decision.propensity_samples,
        }),
        None => {
            missing.get_or_insert(r.round);
        }
    })?;
    if missing.is_some() {
        return Err(Error::Unsupported(format!(
            "{} does not expose propensities; configure Monte-Carlo samples to log it",
            policy.name()
        )));
    }
    Ok(log)
}

/// `(1/n)·Σ_t π(t, A_t)/p_t(A_t)·r_t` where `target(round, arm)` is the
/// target policy's probability of the logged arm.
pub fn ipw_estimate<F>(log: &[LogRecord], target: F) -> Result<IpwResult>
where
    F: Fn(usize, usize) -> f64,
{
    if log.is_empty() {
        return Err(Error::invalid("cannot estimate from an empty log"));
    }
    let mut weights = Vec::with_capacity(log.len());
    let mut total = 0.0;
    for rec in log {
        if rec.is_poisoned() {
            return Err(Error::EstimatorUndefined {
                round: rec.round,
                propensity: rec.propensity,
            });
        }
        let w = target(rec.round, rec.arm_index) / rec.propensity;
        total += w * rec.reward;
        weights.push(w);
    }
    Ok(IpwResult {
        estimate: total / log.len() as f64,
        n: log.len(),
        per_record_weights: weights,
    })
}

/// Uniform target over `k` arms, as a function usable by [`ipw_estimate`].
pub fn uniform_target(k: usize) -> impl Fn(usize, usize) -> f64 {
    move |_, _| 1.0 / k as f64
}

/// Exact value `Σ_a π(a)·⟨θ*, a⟩` of a fixed target distribution.
pub fn oracle_value(target_probs: &[f64], instance: &Instance) -> Result<f64> {
    let arms = match instance.arm_source() {
        ArmSource::Fixed(arms) => arms,
        ArmSource::PerRoundUnitBall { .. } => {
            return Err(Error::Unsupported(
                "oracle value needs a fixed arm set".into(),
            ))
        }
    };
    if target_probs.len() != arms.len() {
        return Err(Error::invalid(format!(
            "target has {} probabilities for {} arms",
            target_probs.len(),
            arms.len()
        )));
    }
    Ok(arms
        .iter()
        .zip(target_probs)
        .map(|(a, p)| p * instance.mean_reward(a))
        .sum())
}

pub const LOG_HEADER: [&str; 4] = ["round", "arm_index", "propensity", "reward"];

pub fn write_log<W: Write>(writer: W, log: &[LogRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(LOG_HEADER)?;
    for r in log {
        w.write_record([
            r.round.to_string(),
            r.arm_index.to_string(),
            r.propensity.to_string(),
            r.reward.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_log<R: Read>(reader: R) -> Result<Vec<LogRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().ne(LOG_HEADER) {
        return Err(Error::Schema {
            line: 1,
            message: format!("expected header {}", LOG_HEADER.join(",")),
        });
    }
    let mut log = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != 4 {
            return Err(Error::Schema {
                line,
                message: format!("expected 4 fields, found {}", record.len()),
            });
        }
        let bad = |e: &dyn std::fmt::Display| Error::Parse {
            line,
            message: e.to_string(),
        };
        log.push(LogRecord {
            round: record[0].parse().map_err(|e| bad(&e))?,
            arm_index: record[1].parse().map_err(|e| bad(&e))?,
            propensity: record[2].parse().map_err(|e| bad(&e))?,
            reward: record[3].parse().map_err(|e| bad(&e))?,
            mc_samples: None,
        });
    }
    Ok(log)
}

pub fn write_log_file(path: impl AsRef<Path>, log: &[LogRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
    write_log(std::io::BufWriter::new(file), log)
}

pub fn read_log_file(path: impl AsRef<Path>) -> Result<Vec<LogRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
    read_log(file)
}

/// Writes `trial,estimate` rows.
pub fn write_estimates<W: Write>(writer: W, estimates: &[(usize, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["trial", "estimate"])?;
    for (trial, est) in estimates {
        w.write_record([trial.to_string(), est.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
