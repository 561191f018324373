//! `hmhf`: profile, spectrum, evolution, tuning and blowup experiments for
//! the corotational harmonic map heat flow into the 3-sphere.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod pipeline;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;

use config::{parse_config, Command, Overrides, RunConfig};

#[derive(Parser)]
#[command(
    name = "hmhf",
    version,
    about = "Self-similar blowup experiments for the harmonic map heat flow"
)]
struct Cli {
    /// Stage to run; overrides `command` in the configuration file.
    #[arg(value_enum)]
    command: Option<Command>,
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Maximum number of worker threads.
    #[arg(long)]
    workers: Option<usize>,
    /// Seed for randomized test data (overrides `seed`).
    #[arg(long)]
    seed: Option<u64>,
}

fn load(cli: &Cli) -> Result<(RunConfig, String)> {
    let text = match &cli.config {
        Some(path) => {
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?
        }
        None => String::new(),
    };
    let ov = Overrides {
        command: cli.command,
        output_dir: cli.out.clone(),
        seed: cli.seed,
    };
    Ok((parse_config(&text, &ov)?, text))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let (cfg, text) = match load(&cli) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    match pipeline::run(&cfg, &text, cli.workers) {
        Ok(m) => {
            println!(
                "manifest: {}",
                cfg.output_dir.join("manifest.json").display()
            );
            match m.failure {
                None => ExitCode::SUCCESS,
                Some(f) => {
                    eprintln!("error: {f}");
                    ExitCode::FAILURE
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
