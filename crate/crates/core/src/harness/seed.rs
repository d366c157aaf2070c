//! Counter-based seed derivation.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `parts` into `master` one word at a time.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Stream tags keep independent uses of one trial apart.
pub mod stream {
    pub const TRIAL: u64 = 1;
    pub const INSTANCE: u64 = 2;
}

/// Seed for one `(policy, trial)` run.
pub fn trial_seed(master: u64, policy_ordinal: usize, trial: usize) -> u64 {
    derive_seed(master, &[stream::TRIAL, policy_ordinal as u64, trial as u64])
}

/// Seed for a randomly generated instance in `trial`, shared by all policies.
pub fn instance_seed(master: u64, trial: usize) -> u64 {
    derive_seed(master, &[stream::INSTANCE, trial as u64])
}
