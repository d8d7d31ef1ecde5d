//! `roughmf` command-line experiments.

mod commands;
mod config;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "roughmf", version, about = "Rough Heston and its multi-factor approximation")]
struct Cli {
    /// JSON config merged over the built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Dotted override, e.g. `--set model.nu=0.2`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Kernel weights, rates, L¹/L² errors and bounds per factor count.
    Kernel,
    /// Relative error of the multi-factor Riccati solution over a b-grid.
    Riccati,
    /// Call prices from both solvers.
    Price,
    /// Implied volatility smiles from both solvers.
    Smile,
    /// Monte Carlo paths with Fourier cross-checks.
    Simulate,
    /// Solver runtime scaling in steps and factors.
    Bench,
    /// Print the resolved configuration.
    Config,
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    if let Some(dir) = cli.out {
        cfg.output_dir = dir;
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Kernel => commands::kernel(&cfg),
        Command::Riccati => commands::riccati(&cfg),
        Command::Price => commands::price(&cfg),
        Command::Smile => commands::smile_cmd(&cfg),
        Command::Simulate => commands::simulate(&cfg),
        Command::Bench => commands::bench(&cfg),
        Command::Config => {
            println!("{}", serde_json::to_string_pretty(&cfg)?);
            Ok(())
        }
    }
}
