//! Experiment configuration, seeding, simulation and verification.

pub mod config;
pub mod experiment;
pub mod seed;
pub mod sim;
pub mod verify;

pub use config::{build_instance, build_policy, ExperimentConfig, InstanceSpec, PolicySpec};
pub use experiment::{
    checkpoints, run_experiment, run_experiment_to_dir, run_ope, run_ope_to_dir,
    write_ope_summary_csv, write_regret_csv, OpeOutcome, OpeSummary, RegretCurve, THREADS_ENV,
};
pub use seed::{derive_seed, instance_seed, trial_seed};
pub use sim::{simulate, RoundRecord};
