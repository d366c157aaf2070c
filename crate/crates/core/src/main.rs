use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;

use linmed::design::{approx_design, design_cap};
use linmed::envs::{load_arms_csv, sample_unit_ball};
use linmed::harness::{
    derive_seed, run_experiment_to_dir, run_ope_to_dir, verify, ExperimentConfig, THREADS_ENV,
};
use linmed::{ArmVector, Error, Result, SimRng};

#[derive(Parser, Debug)]
#[command(name = "linmed", version, about = "Linear bandit experiments, designs and off-policy evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, env = THREADS_ENV)]
    threads: Option<usize>,
    /// Overrides the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Cumulative-regret experiments; writes regret.csv.
    Run(RunArgs),
    /// Off-policy evaluation of the uniform policy from logged runs.
    Ope(RunArgs),
    /// Optimality certificates of the approximate design.
    DesignCheck {
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        /// Number of random arm sets.
        #[arg(long, default_value_t = 100)]
        seeds: usize,
        /// Check a single arm set read from a CSV file instead.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Normalize CSV rows to unit norm.
        #[arg(long)]
        normalize: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Built-in invariant suites.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load(args: &RunArgs) -> Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
    cfg.output_dir = out.display().to_string();
    Ok((cfg, out))
}

fn check_arm_set(arms: &[ArmVector]) -> Result<(f64, usize)> {
    let (_, report) = approx_design(arms)?;
    let d = arms[0].dim();
    if report.max_leverage > report.tau as f64 * (1.0 + 1e-9) || report.tau > design_cap(d) {
        return Err(Error::Internal {
            message: "design certificate violated".into(),
            report: format!("{report:?}"),
        });
    }
    Ok((report.max_leverage, report.tau))
}

fn ratio(tau: usize, d: usize) -> f64 {
    let dl = d as f64 * (d as f64).ln();
    if dl > 0.0 {
        tau as f64 / dl
    } else {
        f64::NAN
    }
}

fn design_check(
    d: Option<usize>,
    k: Option<usize>,
    seeds: usize,
    csv: Option<PathBuf>,
    normalize: bool,
    seed: u64,
) -> Result<()> {
    if let Some(path) = csv {
        let arms = load_arms_csv(&path, normalize)?;
        let (g, tau) = check_arm_set(&arms)?;
        let d = arms[0].dim();
        println!("d={d} K={} g={g} tau={tau} cap={} tau/(d ln d)={}", arms.len(), design_cap(d), ratio(tau, d));
        return Ok(());
    }
    let (d, k) = match (d, k) {
        (Some(d), Some(k)) if d > 0 && k > 0 => (d, k),
        _ => {
            return Err(Error::InvalidArgument(
                "design-check needs positive --d and --k, or --csv".into(),
            ))
        }
    };
    let mut worst_tau = 0;
    let mut worst_g: f64 = 0.0;
    for s in 0..seeds {
        let mut rng = SimRng::seed_from_u64(derive_seed(seed, &[d as u64, k as u64, s as u64]));
        let arms: Vec<ArmVector> = (0..k).map(|_| sample_unit_ball(d, &mut rng)).collect();
        let (g, tau) = check_arm_set(&arms)?;
        worst_tau = worst_tau.max(tau);
        worst_g = worst_g.max(g);
    }
    println!(
        "d={d} K={k} sets={seeds} max_g={worst_g} max_tau={worst_tau} cap={} max tau/(d ln d)={}",
        design_cap(d),
        ratio(worst_tau, d)
    );
    Ok(())
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run(args) => {
            let (cfg, out) = load(&args)?;
            let (curves, written) = run_experiment_to_dir(&cfg, args.threads, &out)?;
            for c in &curves {
                println!(
                    "{} final mean regret {} (stderr {}, {} trials)",
                    c.policy,
                    c.final_mean(),
                    c.final_stderr(),
                    c.trials
                );
            }
            for p in written {
                println!("wrote {}", p.display());
            }
        }
        Command::Ope(args) => {
            let (cfg, out) = load(&args)?;
            let (outcomes, written) = run_ope_to_dir(&cfg, args.threads, &out)?;
            for o in &outcomes {
                let s = &o.summary;
                println!(
                    "{} mean {} std {} oracle {} ({} of {} trials poisoned)",
                    s.policy, s.mean, s.std, s.oracle, s.poisoned_trials, s.trials
                );
            }
            for p in written {
                println!("wrote {}", p.display());
            }
        }
        Command::DesignCheck {
            d,
            k,
            seeds,
            csv,
            normalize,
            seed,
        } => design_check(d, k, seeds, csv, normalize, seed)?,
        Command::Verify { seed } => {
            let results = verify::run_all(seed);
            for r in &results {
                println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
            }
            return Ok(results.iter().all(|r| r.passed));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("linmed: {e}");
            ExitCode::from(2)
        }
    }
}
