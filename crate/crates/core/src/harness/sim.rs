//! The bandit interaction loop.

use rand::SeedableRng;

use crate::envs::{DelayQueue, Instance, StepOutcome};
use crate::error::Result;
use crate::linalg::ArmVector;
use crate::policies::{Policy, PolicyDecision};
use crate::SimRng;

const POLICY_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;

/// What happened in one round.
#[derive(Debug)]
pub struct RoundRecord<'a> {
    pub round: usize,
    pub arms: &'a [ArmVector],
    pub decision: &'a PolicyDecision,
    pub outcome: StepOutcome,
    /// Feedback pairs absorbed by the learner at the end of this round.
    pub absorbed: usize,
}

/// Runs `policy` on `instance` for `horizon` rounds (numbered from 1).
///
/// The policy's randomness and the reward noise come from two independent
/// streams of `seed`. Rewards reach the policy `delay` rounds after they are
/// generated; anything still buffered when the horizon ends is absorbed
/// afterwards so that every generated pair is seen exactly once.
pub fn simulate<F>(
    policy: &mut dyn Policy,
    instance: &Instance,
    horizon: usize,
    delay: usize,
    seed: u64,
    mut on_round: F,
) -> Result<()>
where
    F: FnMut(&RoundRecord<'_>),
{
    let mut policy_rng = SimRng::seed_from_u64(seed);
    policy_rng.set_stream(POLICY_STREAM);
    let mut noise_rng = SimRng::seed_from_u64(seed);
    noise_rng.set_stream(NOISE_STREAM);
    let mut queue: DelayQueue<(ArmVector, f64)> = DelayQueue::new(delay);

    for round in 1..=horizon {
        let arms = instance.arms(round);
        let decision = policy.decide(&arms, &mut policy_rng)?;
        let outcome = instance.step_with(&arms, decision.arm_index, &mut noise_rng)?;
        queue.push(round, (arms[decision.arm_index].clone(), outcome.reward));
        let released = queue.release(round);
        let absorbed = released.len();
        for (arm, reward) in released {
            policy.observe(&arm, reward)?;
        }
        on_round(&RoundRecord {
            round,
            arms: &arms,
            decision: &decision,
            outcome,
            absorbed,
        });
    }
    for (arm, reward) in queue.drain() {
        policy.observe(&arm, reward)?;
    }
    Ok(())
}
