use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use slab_adjoint::cli::{execute, Mode, EXIT_ERROR};
use slab_adjoint::config::{OutputFormat, RunConfig, DEFAULT_CONFIG_TEXT};

/// Adjoint sensitivities and uncertainty moments for a slab detector response.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute sensitivities and moments, with cross-path and symmetry checks.
    Run(Common),
    /// Run the full verification suite.
    Verify(Common),
    /// Write the sensitivity and moment tables only.
    Tables(Common),
    /// Print the default configuration file.
    DefaultConfig,
}

#[derive(Args)]
struct Common {
    /// Configuration file (flat `key = value`); defaults apply without one.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of grid nodes.
    #[arg(long)]
    grid: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Seed for the randomized duality check.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Tsv,
    Json,
    Both,
}

fn load(common: &Common) -> anyhow::Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_path(path).with_context(|| format!("loading {}", path.display()))?,
        None => RunConfig::default(),
    };
    if let Some(n) = common.grid {
        cfg.n_nodes = n;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    if let Some(f) = common.format {
        cfg.format = match f {
            Format::Tsv => OutputFormat::Tsv,
            Format::Json => OutputFormat::Json,
            Format::Both => OutputFormat::Both,
        };
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, common) = match cli.command {
        Command::Run(c) => (Mode::Run, c),
        Command::Verify(c) => (Mode::Verify, c),
        Command::Tables(c) => (Mode::Tables, c),
        Command::DefaultConfig => {
            print!("{DEFAULT_CONFIG_TEXT}");
            return ExitCode::SUCCESS;
        }
    };
    let outcome = load(&common).and_then(|cfg| Ok(execute(mode, &cfg)?));
    match outcome {
        Ok(outcome) => {
            print!("{}", outcome.summary());
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
