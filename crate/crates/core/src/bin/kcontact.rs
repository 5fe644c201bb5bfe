use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kcontact::cli::{self, exit_code, to_json, EXIT_OK, EXIT_VERIFY_FAILED};
use kcontact::config::RunConfig;
use kcontact::Result;

#[derive(Parser)]
#[command(name = "kcontact", version, about = "Horizontal holonomy of K-contact sub-Riemannian manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the sampler seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of sampled paths.
    #[arg(long)]
    paths: Option<usize>,
    /// Also write the report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Seeded {
    #[arg(long)]
    config: PathBuf,
    /// Sampler seed (required for reproducibility).
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the structural identities, transports and loop equivalence.
    Verify(Common),
    /// Estimate holonomy algebras and analyze their structure.
    Holonomy(Seeded),
    /// Spin representation checks for the chart's rank.
    Spinor(Common),
    /// Print the built-in example manifolds.
    ListManifolds {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(config: &Path, seed: Option<u64>, paths: Option<usize>, out: &Option<PathBuf>) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(s) = seed {
        cfg.sampler.seed = s;
    }
    if let Some(p) = paths {
        cfg.sampler.n_paths = p;
    }
    if out.is_some() {
        cfg.out = out.clone();
    }
    Ok(cfg)
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<()> {
    print!("{text}");
    if let Some(path) = out {
        std::fs::write(path, text)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Verify(c) => {
            let cfg = load(&c.config, c.seed, c.paths, &c.out)?;
            let report = cli::cmd_verify(&cfg)?;
            emit(&to_json(&report)?, cfg.out.as_ref())?;
            Ok(if report.passed { EXIT_OK } else { EXIT_VERIFY_FAILED })
        }
        Command::Holonomy(c) => {
            let cfg = load(&c.config, Some(c.seed), c.paths, &c.out)?;
            let report = cli::cmd_holonomy(&cfg)?;
            emit(&to_json(&report)?, cfg.out.as_ref())?;
            Ok(EXIT_OK)
        }
        Command::Spinor(c) => {
            let cfg = load(&c.config, c.seed, c.paths, &c.out)?;
            let report = cli::cmd_spinor(&cfg)?;
            emit(&to_json(&report)?, cfg.out.as_ref())?;
            Ok(EXIT_OK)
        }
        Command::ListManifolds { out } => {
            emit(&to_json(&cli::list_manifolds()?)?, out.as_ref())?;
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
