//! `coalhaus` command-line driver.
//!
//! Exit codes: 0 success, 1 a statistical check failed, 2 usage error,
//! 3 malformed config or unknown key, 4 invalid parameters, 5 I/O error.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::ExperimentConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "coalhaus", version, about = "Lookdown and coalescent simulations for logistic branching populations")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; replicate r uses stream r.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    reps: Option<u64>,
    /// Output prefix (simulations) or file path.
    #[arg(long, global = true)]
    out: Option<String>,
    /// Worker threads; COALHAUS_THREADS takes precedence.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Scenario {
    KingmanDefault,
    BetaDefault,
    BolthausenSznitmanDefault,
    LimitLookdown,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Population sizes and type frequencies on a time grid.
    SimulatePopulation {
        #[arg(long = "K")]
        big_k: Option<u64>,
        #[arg(long)]
        horizon: Option<f64>,
        /// `start:stop:step` or a comma-separated list of rescaled times.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        alphabet: Option<u32>,
    },
    /// Lookdown event logs.
    SimulateLookdown {
        #[arg(long = "K")]
        big_k: Option<u64>,
        #[arg(long)]
        k: Option<usize>,
        /// `scalable` or `oracle`.
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        alphabet: Option<u32>,
    },
    /// Limiting Poisson lookdown on the lowest k levels.
    SimulateLimit {
        #[arg(long)]
        lambda: Option<String>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Direct Λ-coalescent sampler.
    SimulateCoalescent {
        #[arg(long)]
        lambda: Option<String>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Partition paths of the lowest k levels from an event CSV.
    Genealogy {
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Prelimit vs limit merger rates over a grid of population sizes.
    VerifyRates {
        #[arg(long)]
        regime: Option<String>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        offspring: Option<String>,
        #[arg(long)]
        k: Option<usize>,
        /// Comma-separated scaling parameters.
        #[arg(long = "K")]
        big_k: Option<String>,
        #[arg(long)]
        n_grid: Option<String>,
    },
    /// Table of Λ-coalescent merger rates for one block count.
    Rates {
        #[arg(long)]
        lambda: Option<String>,
        #[arg(long)]
        n: usize,
    },
    /// Statistical comparison of a prelimit or limit genealogy with the
    /// direct sampler; writes one JSON report per line.
    Compare {
        #[arg(long, value_enum)]
        scenario: Scenario,
        #[arg(long = "K")]
        big_k: Option<u64>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Summarises JSON report files; fails if any check failed.
    Report { files: Vec<PathBuf> },
}

/// Flag values that override config entries.
fn overrides(cli: &Cli) -> Vec<(&'static str, &'static str, String)> {
    let mut v = Vec::new();
    let mut put = |sec, key, val: Option<String>| {
        if let Some(val) = val {
            v.push((sec, key, val));
        }
    };
    let c = &cli.common;
    put("experiment", "seed", c.seed.map(|x| x.to_string()));
    put("experiment", "reps", c.reps.map(|x| x.to_string()));
    put("experiment", "out", c.out.clone());
    let s = |x: Option<f64>| x.map(output::fmt_f64);
    match &cli.command {
        Command::SimulatePopulation { big_k, horizon, grid, alphabet } => {
            put("regime", "K", big_k.map(|x| x.to_string()));
            put("experiment", "horizon", s(*horizon));
            put("experiment", "grid", grid.clone());
            put("experiment", "alphabet", alphabet.map(|x| x.to_string()));
        }
        Command::SimulateLookdown { big_k, k, mode, horizon, alphabet } => {
            put("regime", "K", big_k.map(|x| x.to_string()));
            put("experiment", "k", k.map(|x| x.to_string()));
            put("experiment", "mode", mode.clone());
            put("experiment", "horizon", s(*horizon));
            put("experiment", "alphabet", alphabet.map(|x| x.to_string()));
        }
        Command::SimulateLimit { lambda, k, horizon } | Command::SimulateCoalescent { lambda, k, horizon } => {
            put("experiment", "lambda", lambda.clone());
            put("experiment", "k", k.map(|x| x.to_string()));
            put("experiment", "horizon", s(*horizon));
        }
        Command::Genealogy { k, .. } => put("experiment", "k", k.map(|x| x.to_string())),
        Command::VerifyRates { regime, alpha, offspring, k, big_k, n_grid } => {
            put("regime", "regime", regime.clone());
            put("regime", "alpha", s(*alpha));
            put("regime", "offspring", offspring.clone());
            put("experiment", "k", k.map(|x| x.to_string()));
            put("experiment", "K_list", big_k.clone());
            put("experiment", "n_grid", n_grid.clone());
        }
        Command::Rates { lambda, .. } => put("experiment", "lambda", lambda.clone()),
        Command::Compare { big_k, k, horizon, .. } => {
            put("regime", "K", big_k.map(|x| x.to_string()));
            put("experiment", "k", k.map(|x| x.to_string()));
            put("experiment", "horizon", s(*horizon));
        }
        Command::Report { .. } => {}
    }
    v
}

/// Command defaults, then the config file, then flags.
fn effective_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.command {
        Command::Compare { scenario, .. } => commands::scenario_defaults(*scenario),
        Command::VerifyRates { .. } => commands::verify_rates_defaults(),
        _ => ExperimentConfig::default(),
    };
    if let Some(path) = &cli.common.config {
        let text = output::read_file(path)?;
        cfg.merge(&ExperimentConfig::parse(&text)?);
    }
    for (sec, key, val) in overrides(cli) {
        cfg.set(sec, key, val);
    }
    Ok(cfg)
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    match std::env::var("COALHAUS_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| CliError::Usage(format!("COALHAUS_THREADS must be a positive integer, got `{v}`"))),
        Err(_) => match flag {
            Some(0) => Err(CliError::Usage("--threads must be positive".into())),
            other => Ok(other),
        },
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = thread_count(cli.common.threads)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let cfg = effective_config(&cli)?;
    let ctx = commands::Context::new(cfg)?;
    match &cli.command {
        Command::SimulatePopulation { .. } => commands::run_population(&ctx),
        Command::SimulateLookdown { .. } => commands::run_lookdown(&ctx),
        Command::SimulateLimit { .. } => commands::run_limit(&ctx),
        Command::SimulateCoalescent { .. } => commands::run_coalescent(&ctx),
        Command::Genealogy { events, .. } => commands::genealogy(&ctx, events),
        Command::VerifyRates { .. } => commands::verify_rates(&ctx),
        Command::Rates { n, .. } => commands::rates(&ctx, *n),
        Command::Compare { scenario, .. } => commands::compare(&ctx, *scenario),
        Command::Report { files } => commands::report(files),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("coalhaus: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
