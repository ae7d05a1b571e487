//! The `lnn` command line: configuration, experiment runs, result files,
//! plots and latency benchmarks.

// `!(x > 0.0)` is how NaN gets rejected; index loops read better in the numerics.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bench;
pub mod commands;
pub mod config;
pub mod manifest;
pub mod plot;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use anyhow::{anyhow, Result};
use clap::ValueEnum;

use config::ExperimentConfig;
use manifest::ManifestWriter;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Gen,
    TrainPredict,
    EvalPredict,
    RunBf,
    Bench,
    Plot,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Gen => "gen",
            Command::TrainPredict => "train-predict",
            Command::EvalPredict => "eval-predict",
            Command::RunBf => "run-bf",
            Command::Bench => "bench",
            Command::Plot => "plot",
        }
    }
}

/// Worker count from `LNN_THREADS`, if set.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var("LNN_THREADS") {
        Ok(v) => {
            let n: usize = v.trim().parse().map_err(|_| anyhow!("LNN_THREADS={v:?} is not a positive integer"))?;
            if n == 0 {
                return Err(anyhow!("LNN_THREADS must be >= 1"));
            }
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}

/// Runs `cmd` under a manifest in the config's output directory. Returns
/// the paths written, manifest excluded.
pub fn run(cmd: Command, cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let out = cfg.run.out_dir.clone();
    let manifest = ManifestWriter::begin(&out, cmd.name(), &cfg.render(), cfg.run.seed)?;
    let res = catch_unwind(AssertUnwindSafe(|| match cmd {
        Command::Gen => commands::gen(cfg, &out),
        Command::TrainPredict => commands::train_predict(cfg, &out),
        Command::EvalPredict => commands::eval_predict(cfg, &out),
        Command::RunBf => commands::run_bf(cfg, &out),
        Command::Bench => commands::bench(cfg, &out),
        Command::Plot => commands::plot(cfg, &out),
    }));
    let res = match res {
        Ok(r) => r,
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(anyhow!("panicked: {msg}"))
        }
    };
    match res {
        Ok(files) => {
            manifest.finish_ok(files.clone())?;
            Ok(files.into_iter().map(|f| out.join(f)).collect())
        }
        Err(e) => {
            manifest.finish_failed(&format!("{e:#}"))?;
            Err(e)
        }
    }
}
