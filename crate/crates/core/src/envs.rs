//! Simulated environments: arm sets, the true parameter and reward noise.

use std::borrow::Cow;
use std::collections::VecDeque;
use std::io::Read;
use std::path::Path;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::ArmVector;
use crate::SimRng;

/// Where a round's arm set comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum ArmSource {
    Fixed(Vec<ArmVector>),
    /// A fresh set of `k` arms drawn uniformly from the unit ball each round,
    /// as a deterministic function of `(seed, round)`.
    PerRoundUnitBall { k: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    name: String,
    theta_star: DVector<f64>,
    sigma_star_sq: f64,
    arm_source: ArmSource,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub instant_regret: f64,
}

impl Instance {
    pub fn new(
        name: impl Into<String>,
        theta_star: Vec<f64>,
        sigma_star_sq: f64,
        arm_source: ArmSource,
    ) -> Result<Self> {
        let dim = theta_star.len();
        if dim == 0 {
            return Err(Error::invalid("theta_star must have at least one coordinate"));
        }
        if !(sigma_star_sq >= 0.0 && sigma_star_sq.is_finite()) {
            return Err(Error::invalid(format!(
                "noise variance must be nonnegative, got {sigma_star_sq}"
            )));
        }
        match &arm_source {
            ArmSource::Fixed(arms) => {
                if arms.is_empty() {
                    return Err(Error::invalid("arm set must be nonempty"));
                }
                if let Some(bad) = arms.iter().position(|a| a.dim() != dim) {
                    return Err(Error::invalid(format!(
                        "arm {bad} has dimension {}, theta_star has {dim}",
                        arms[bad].dim()
                    )));
                }
            }
            ArmSource::PerRoundUnitBall { k, .. } => {
                if *k == 0 {
                    return Err(Error::invalid("arm count must be positive"));
                }
            }
        }
        Ok(Self {
            name: name.into(),
            theta_star: DVector::from_vec(theta_star),
            sigma_star_sq,
            arm_source,
        })
    }

    pub fn with_sigma_star_sq(mut self, sigma_star_sq: f64) -> Result<Self> {
        if !(sigma_star_sq >= 0.0 && sigma_star_sq.is_finite()) {
            return Err(Error::invalid(format!(
                "noise variance must be nonnegative, got {sigma_star_sq}"
            )));
        }
        self.sigma_star_sq = sigma_star_sq;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.theta_star.len()
    }

    pub fn theta_star(&self) -> &DVector<f64> {
        &self.theta_star
    }

    pub fn sigma_star_sq(&self) -> f64 {
        self.sigma_star_sq
    }

    pub fn arm_source(&self) -> &ArmSource {
        &self.arm_source
    }

    /// The fixed arm set, if the instance has one.
    pub fn fixed_arms(&self) -> Option<&[ArmVector]> {
        match &self.arm_source {
            ArmSource::Fixed(arms) => Some(arms),
            ArmSource::PerRoundUnitBall { .. } => None,
        }
    }

    /// Arm set offered at `round` (1-based).
    pub fn arms(&self, round: usize) -> Cow<'_, [ArmVector]> {
        match &self.arm_source {
            ArmSource::Fixed(arms) => Cow::Borrowed(arms),
            ArmSource::PerRoundUnitBall { k, seed } => {
                let mut rng = SimRng::seed_from_u64(*seed);
                rng.set_stream(round as u64);
                Cow::Owned((0..*k).map(|_| sample_unit_ball(self.dim(), &mut rng)).collect())
            }
        }
    }

    pub fn mean_reward(&self, arm: &ArmVector) -> f64 {
        arm.dot(&self.theta_star)
    }

    /// `max_a ⟨θ*, a⟩` over the given set.
    pub fn optimal_mean(&self, arms: &[ArmVector]) -> f64 {
        arms.iter()
            .map(|a| self.mean_reward(a))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Per-arm gaps `max_b ⟨θ*, b⟩ − ⟨θ*, a⟩` for a round's arm set.
    pub fn gaps(&self, arms: &[ArmVector]) -> Vec<f64> {
        let best = self.optimal_mean(arms);
        arms.iter().map(|a| best - self.mean_reward(a)).collect()
    }

    /// Pulls `arm_index` among `arms`, drawing the noise from `rng`.
    pub fn step_with(
        &self,
        arms: &[ArmVector],
        arm_index: usize,
        rng: &mut SimRng,
    ) -> Result<StepOutcome> {
        let arm = arms.get(arm_index).ok_or_else(|| {
            Error::invalid(format!(
                "arm index {arm_index} out of range for {} arms",
                arms.len()
            ))
        })?;
        let mean = self.mean_reward(arm);
        let noise = if self.sigma_star_sq > 0.0 {
            let z: f64 = StandardNormal.sample(rng);
            self.sigma_star_sq.sqrt() * z
        } else {
            0.0
        };
        Ok(StepOutcome {
            reward: mean + noise,
            instant_regret: (self.optimal_mean(arms) - mean).max(0.0),
        })
    }

    pub fn step(&self, round: usize, arm_index: usize, rng: &mut SimRng) -> Result<StepOutcome> {
        self.step_with(&self.arms(round), arm_index, rng)
    }
}

fn arms_from(rows: &[&[f64]]) -> Vec<ArmVector> {
    rows.iter()
        .map(|r| ArmVector::new(r.to_vec()).expect("built-in arms are unit-bounded"))
        .collect()
}

/// `{(1,0), (0,1)}` with `θ* = (1,0)` and unit noise variance.
pub fn large_gap_instance() -> Instance {
    Instance::new(
        "large-gap",
        vec![1.0, 0.0],
        1.0,
        ArmSource::Fixed(arms_from(&[&[1.0, 0.0], &[0.0, 1.0]])),
    )
    .expect("valid built-in instance")
}

pub const END_OF_OPTIMISM_EPSILONS: [f64; 3] = [0.005, 0.01, 0.02];

/// `{(1,0), (0,1), (1−ε, 2ε)}` with `θ* = (1,0)` and `σ*² = 0.01`.
pub fn end_of_optimism_instance(epsilon: f64) -> Result<Instance> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::invalid(format!("epsilon must lie in (0, 1/2), got {epsilon}")));
    }
    let third = ArmVector::new(vec![1.0 - epsilon, 2.0 * epsilon])?;
    let mut arms = arms_from(&[&[1.0, 0.0], &[0.0, 1.0]]);
    arms.push(third);
    Instance::new("end-of-optimism", vec![1.0, 0.0], 0.01, ArmSource::Fixed(arms))
}

/// One optimal arm `(1,0)` followed by `K−1` copies of `(0,1)`; `σ*² = 3`.
pub fn k_dependency_instance(k: usize) -> Result<Instance> {
    if k < 2 {
        return Err(Error::invalid(format!("K must be at least 2, got {k}")));
    }
    let mut arms = arms_from(&[&[1.0, 0.0]]);
    arms.extend(std::iter::repeat_n(arms_from(&[&[0.0, 1.0]]).remove(0), k - 1));
    Instance::new("k-dependency", vec![1.0, 0.0], 3.0, ArmSource::Fixed(arms))
}

pub fn sample_unit_sphere(dim: usize, rng: &mut SimRng) -> DVector<f64> {
    loop {
        let v = DVector::<f64>::from_fn(dim, |_, _| StandardNormal.sample(rng));
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

pub fn sample_unit_ball(dim: usize, rng: &mut SimRng) -> ArmVector {
    let dir = sample_unit_sphere(dim, rng);
    let u: f64 = rng.random();
    let radius = u.powf(1.0 / dim as f64);
    ArmVector::from_vector(dir * radius).expect("ball sample has norm at most 1")
}

/// `K` arms drawn uniformly from the unit ball and `θ*` drawn uniformly from
/// the unit sphere; both fixed for the instance. `σ*² = 1`.
pub fn unit_ball_instance(dim: usize, k: usize, seed: u64) -> Result<Instance> {
    if dim == 0 || k == 0 {
        return Err(Error::invalid("dimension and arm count must be positive"));
    }
    let mut rng = SimRng::seed_from_u64(seed);
    let theta = sample_unit_sphere(dim, &mut rng);
    let arms = (0..k).map(|_| sample_unit_ball(dim, &mut rng)).collect();
    Instance::new("unit-ball", theta.as_slice().to_vec(), 1.0, ArmSource::Fixed(arms))
}

/// Like [`unit_ball_instance`] but with a fresh arm set every round.
pub fn unit_ball_per_round_instance(dim: usize, k: usize, seed: u64) -> Result<Instance> {
    if dim == 0 || k == 0 {
        return Err(Error::invalid("dimension and arm count must be positive"));
    }
    let mut rng = SimRng::seed_from_u64(seed);
    let theta = sample_unit_sphere(dim, &mut rng);
    let arm_seed = rng.random();
    Instance::new(
        "unit-ball-per-round",
        theta.as_slice().to_vec(),
        1.0,
        ArmSource::PerRoundUnitBall { k, seed: arm_seed },
    )
}

/// `{(1,0), (0.6,0.8)}` with `θ* = (1,0)` and `σ*² = 0.1`.
pub fn ope_instance() -> Instance {
    Instance::new(
        "ope",
        vec![1.0, 0.0],
        0.1,
        ArmSource::Fixed(arms_from(&[&[1.0, 0.0], &[0.6, 0.8]])),
    )
    .expect("valid built-in instance")
}

pub const DELAY_PRESETS: [usize; 3] = [0, 10, 20];

/// FIFO queue releasing feedback generated at round `t` at round `t + delay`.
#[derive(Clone, Debug)]
pub struct DelayQueue<T> {
    delay: usize,
    queue: VecDeque<(usize, T)>,
}

impl<T> DelayQueue<T> {
    pub fn new(delay: usize) -> Self {
        Self {
            delay,
            queue: VecDeque::new(),
        }
    }

    pub fn delay(&self) -> usize {
        self.delay
    }

    pub fn push(&mut self, round: usize, item: T) {
        self.queue.push_back((round, item));
    }

    /// Items that become visible at the end of `round`, oldest first.
    pub fn release(&mut self, round: usize) -> Vec<T> {
        let mut out = Vec::new();
        while let Some(&(generated, _)) = self.queue.front() {
            if generated + self.delay > round {
                break;
            }
            out.push(self.queue.pop_front().expect("front exists").1);
        }
        out
    }

    /// Everything still buffered, oldest first.
    pub fn drain(&mut self) -> Vec<T> {
        self.queue.drain(..).map(|(_, item)| item).collect()
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }
}

/// An instance whose rewards reach the learner `delay` rounds late.
#[derive(Clone, Debug, PartialEq)]
pub struct DelayedInstance {
    pub instance: Instance,
    pub delay: usize,
}

impl DelayedInstance {
    pub fn queue<T>(&self) -> DelayQueue<T> {
        DelayQueue::new(self.delay)
    }
}

pub fn delayed(instance: Instance, delay: usize) -> DelayedInstance {
    DelayedInstance { instance, delay }
}

/// Reads arms from a file of comma-separated rows.
pub fn load_arms_csv(path: impl AsRef<Path>, normalize: bool) -> Result<Vec<ArmVector>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
    load_arms_from_reader(file, normalize)
}

/// Parses arm rows; a first row that is not numeric is taken as a header.
pub fn load_arms_from_reader<R: Read>(reader: R, normalize: bool) -> Result<Vec<ArmVector>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut arms: Vec<ArmVector> = Vec::new();
    let mut dim: Option<usize> = None;
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(row + 1);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(|f| f.parse::<f64>()).collect();
        let coords = match parsed {
            Ok(c) => c,
            Err(_) if row == 0 => continue,
            Err(e) => {
                return Err(Error::Parse {
                    line,
                    message: format!("{e} in row {:?}", record.iter().collect::<Vec<_>>()),
                })
            }
        };
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parse {
                line,
                message: "non-finite coordinate".into(),
            });
        }
        match dim {
            None => dim = Some(coords.len()),
            Some(d) if d != coords.len() => {
                return Err(Error::Schema {
                    line,
                    message: format!("row has {} columns, expected {d}", coords.len()),
                })
            }
            _ => {}
        }
        let arm = if normalize {
            ArmVector::normalized(coords)
        } else {
            ArmVector::new(coords)
        };
        arms.push(arm.map_err(|e| Error::Schema {
            line,
            message: e.to_string(),
        })?);
    }
    if arms.is_empty() {
        return Err(Error::Schema {
            line: 0,
            message: "no arm rows found".into(),
        });
    }
    Ok(arms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_large_gap_rewards() {
        let inst = large_gap_instance().with_sigma_star_sq(0.0).unwrap();
        let mut rng = SimRng::seed_from_u64(0);
        let opt = inst.step(1, 0, &mut rng).unwrap();
        assert_eq!(opt, StepOutcome { reward: 1.0, instant_regret: 0.0 });
        let sub = inst.step(1, 1, &mut rng).unwrap();
        assert_eq!(sub, StepOutcome { reward: 0.0, instant_regret: 1.0 });
        assert!(inst.step(1, 2, &mut rng).is_err());
    }

    #[test]
    fn built_in_geometry() {
        let lg = large_gap_instance();
        assert_eq!((lg.dim(), lg.fixed_arms().unwrap().len()), (2, 2));
        assert_eq!(lg.gaps(lg.fixed_arms().unwrap()), vec![0.0, 1.0]);

        for eps in END_OF_OPTIMISM_EPSILONS {
            let eo = end_of_optimism_instance(eps).unwrap();
            let g = eo.gaps(eo.fixed_arms().unwrap());
            assert_eq!(g[0], 0.0);
            assert_eq!(g[1], 1.0);
            assert!((g[2] - eps).abs() < 1e-15);
            assert_eq!(eo.sigma_star_sq(), 0.01);
        }
        assert!(end_of_optimism_instance(0.0).is_err());

        let kd = k_dependency_instance(4).unwrap();
        let arms = kd.fixed_arms().unwrap();
        assert_eq!(arms.len(), 4);
        assert_eq!(kd.gaps(arms), vec![0.0, 1.0, 1.0, 1.0]);
        assert!(arms[1..].iter().all(|a| a == &arms[1]));
        assert_eq!(kd.sigma_star_sq(), 3.0);
        assert!(k_dependency_instance(1).is_err());

        let ope = ope_instance();
        let g = ope.gaps(ope.fixed_arms().unwrap());
        assert!((g[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn unit_ball_arms_are_bounded_and_seeded() {
        for (d, k) in [(2, 10), (2, 100), (2, 500), (20, 10), (50, 10)] {
            let inst = unit_ball_instance(d, k, 7).unwrap();
            let arms = inst.fixed_arms().unwrap();
            assert_eq!(arms.len(), k);
            assert!(arms.iter().all(|a| a.norm() <= 1.0));
            assert!((inst.theta_star().norm() - 1.0).abs() < 1e-12);
        }
        assert_eq!(unit_ball_instance(3, 5, 1).unwrap(), unit_ball_instance(3, 5, 1).unwrap());
        assert_ne!(unit_ball_instance(3, 5, 1).unwrap(), unit_ball_instance(3, 5, 2).unwrap());
    }

    #[test]
    fn per_round_arm_sets_are_deterministic_per_round() {
        let inst = unit_ball_per_round_instance(3, 4, 9).unwrap();
        assert_eq!(inst.arms(5), inst.arms(5));
        assert_ne!(inst.arms(5), inst.arms(6));
        assert!(inst.fixed_arms().is_none());
    }

    #[test]
    fn delay_queue_semantics() {
        let mut q = DelayQueue::new(2);
        let mut absorbed = Vec::new();
        for t in 1..=5 {
            // decision at round t sees only what was released before it
            if t <= 2 {
                assert!(absorbed.is_empty());
            }
            q.push(t, t);
            absorbed.extend(q.release(t));
        }
        assert_eq!(absorbed, vec![1, 2, 3]);
        absorbed.extend(q.drain());
        assert_eq!(absorbed, vec![1, 2, 3, 4, 5]);

        let mut q0 = DelayQueue::new(0);
        q0.push(1, 'a');
        assert_eq!(q0.release(1), vec!['a']);
    }

    #[test]
    fn csv_arms() {
        let arms = load_arms_from_reader("1,0\n0,1".as_bytes(), false).unwrap();
        assert_eq!(arms.len(), 2);
        assert_eq!(arms[0].coords(), &[1.0, 0.0]);

        let arms = load_arms_from_reader("x,y\n0.5,0.5\n".as_bytes(), false).unwrap();
        assert_eq!(arms.len(), 1);

        match load_arms_from_reader("1,0\n3,4\n".as_bytes(), false) {
            Err(Error::Schema { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected schema error, got {other:?}"),
        }
        let arms = load_arms_from_reader("3,4\n".as_bytes(), true).unwrap();
        assert!((arms[0].coords()[0] - 0.6).abs() < 1e-15);
        assert!((arms[0].coords()[1] - 0.8).abs() < 1e-15);

        match load_arms_from_reader("0.1,0.2\n0.1,abc\n".as_bytes(), false) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        match load_arms_from_reader("0.1,0.2\n0.1,0.2,0.3\n".as_bytes(), false) {
            Err(Error::Schema { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected schema error, got {other:?}"),
        }
    }
}
