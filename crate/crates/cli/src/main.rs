use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;
use lnn_cli::config::ExperimentConfig;
use lnn_cli::{run, threads_from_env, Command};

/// Liquid neural network experiments for wireless channels.
#[derive(Parser, Debug)]
#[command(name = "lnn", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// INI experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `[run] seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `[run] out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main_inner() -> Result<()> {
    let cli = Cli::parse();
    if let Some(n) = threads_from_env()? {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    if let Some(o) = cli.out {
        cfg.run.out_dir = o;
    }
    cfg.validate()?;
    for p in run(cli.command, &cfg)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match main_inner() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
