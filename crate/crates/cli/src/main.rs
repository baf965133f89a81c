//! Configuration-driven experiment runner for the spectral laboratory.
//!
//! Exit codes: 0 all checks pass, 1 some checks fail, 2 invalid
//! configuration, 3 numerical failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::RunContext;
use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "nls-lab", about = "Spectral laboratory for homogeneous-nonlinearity NLS")]
struct Cli {
    /// Experiment configuration (TOML, or JSON by extension).
    #[arg(long, global = true, default_value = "experiment.toml")]
    config: PathBuf,
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for sweep subcommands.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Override the configured RNG seed.
    #[arg(long, global = true)]
    rng_seed: Option<u64>,
    /// Treat assumption warnings as configuration errors.
    #[arg(long, global = true, default_value_t = false)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coefficient table, summability and support checks.
    Coeffs,
    /// Time-integrate the configured problem and record diagnostics.
    Simulate,
    /// Forward run with pullback-profile extraction.
    Scatter,
    /// Contraction-ratio measurement and fixed-point iteration.
    Contraction,
    /// Operator-norm scaling tables.
    LemmaCheck {
        /// Table selector (overrides the config).
        #[arg(long)]
        lemma: Option<String>,
    },
    /// Conjugation and integration-by-parts identity residuals.
    IdentityCheck,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let mut config = match ExperimentConfig::load(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("invalid config: {e:#}");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = cli.rng_seed {
        config.rng_seed = seed;
    }
    let warnings = match config.validate() {
        Ok(w) => w,
        Err(e) => {
            eprintln!("invalid config: {e:#}");
            return ExitCode::from(2);
        }
    };
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    if cli.strict && !warnings.is_empty() {
        eprintln!("strict mode: warnings are fatal");
        return ExitCode::from(2);
    }

    let ctx = match RunContext::new(config, &cli.out, cli.workers) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("cannot prepare output directory: {e:#}");
            return ExitCode::from(2);
        }
    };

    let result = match &cli.command {
        Command::Coeffs => commands::run_coeffs(&ctx),
        Command::Simulate => commands::run_simulate(&ctx),
        Command::Scatter => commands::run_scatter(&ctx),
        Command::Contraction => commands::run_contraction(&ctx),
        Command::LemmaCheck { lemma } => commands::run_lemma_check(&ctx, lemma.as_deref()),
        Command::IdentityCheck => commands::run_identity_check(&ctx),
    };

    let records = match result {
        Ok(r) => r,
        Err(e) => {
            eprintln!("numerical failure: {e:#}");
            return ExitCode::from(3);
        }
    };
    match ctx.finish(records) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("some checks failed; see records.csv");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("cannot write artifacts: {e:#}");
            ExitCode::from(3)
        }
    }
}
