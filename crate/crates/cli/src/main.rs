//! `mast`: runs search-and-tracking experiments and writes per-trial traces,
//! per-step aggregates and a summary into an output directory.
//!
//! Flags override values from `--config`. The sweep flags (`--policy`,
//! `--targets`, `--agents`, `--comm-prob`) accept comma-separated lists.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use mast_core::harness::final_quarter_table;
use mast_core::{run_and_write, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(name = "mast", version, about = "Decentralized multi-agent active search and tracking experiments")]
struct Args {
    /// Plain-text `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// random, renyi, ts-renyi, decster1, decster2 or decster-c.
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    targets: Option<String>,
    #[arg(long)]
    agents: Option<String>,
    #[arg(long)]
    steps: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    /// Per-step broadcast probability.
    #[arg(long = "comm-prob")]
    comm_prob: Option<String>,
    /// Seed of the first trial; trial i uses seed + i.
    #[arg(long)]
    seed: Option<String>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Write every agent's particle cloud after each step.
    #[arg(long)]
    dump_particles: bool,
    /// Sample noise and clutter inside decision rollouts.
    #[arg(long)]
    stochastic_rollouts: bool,
}

fn resolve(args: &Args) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::from_file(p).with_context(|| format!("reading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    let overrides = [
        ("policy", &args.policy),
        ("targets", &args.targets),
        ("agents", &args.agents),
        ("steps", &args.steps),
        ("trials", &args.trials),
        ("share_prob", &args.comm_prob),
        ("base_seed", &args.seed),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            cfg.set(key, v).with_context(|| format!("invalid --{}", key.replace('_', "-")))?;
        }
    }
    if args.dump_particles {
        cfg.dump_particles = true;
    }
    if args.stochastic_rollouts {
        cfg.trial.rollout.stochastic = true;
    }
    cfg.validate().context("invalid configuration")?;
    Ok(cfg)
}

fn run(args: &Args) -> anyhow::Result<()> {
    let cfg = resolve(args)?;
    let results = run_and_write(&cfg, &args.out).with_context(|| format!("writing results to {}", args.out.display()))?;
    for (label, (m, se)) in final_quarter_table(&results) {
        println!("{label}: final-quarter OSPA {m:.4} ± {se:.4}");
    }
    println!("results in {}", args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
