//! Subcommand bodies. Each returns the files it wrote, relative to the
//! output directory.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use lnn_core::checkpoint::Checkpoint;
use lnn_core::wiring::{build_wiring, ncp_cell};
use lnn_core::cells::LtcSolver;
use lnn_core::{Cell, CellKind};
use lnn_wireless::beamform::{run_glnn_experiment, BfReport, SeTrace};
use lnn_wireless::channel::CsiTensor;
use lnn_wireless::predict::{
    evaluate_mse, split_windows, train_predictor, write_eval_csv, ArLs, EvalReport, NaiveHold, NeuralPredictor,
    Standardizer, Trained, WindowedDataset,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bench::{bench_cells, BenchReport, TrainTiming};
use crate::config::{ExperimentConfig, PlotKind, Solver, WiringKind};
use crate::manifest::sha256_hex;
use crate::plot::render_plot;

pub const DATASET_FILE: &str = "dataset.lnncsi";
pub const PREDICTOR_CKPT: &str = "predictor.ckpt";
pub const BASELINE_CKPT: &str = "gru_baseline.ckpt";
pub const CURVE_CSV: &str = "train_curve.csv";
pub const EVAL_CSV: &str = "eval_predict.csv";
pub const SE_CSV: &str = "se_trace.csv";
pub const SE_SUMMARY_CSV: &str = "se_summary.csv";
pub const BF_REPORT: &str = "bf_report.json";
pub const BENCH_JSON: &str = "bench.json";
pub const BENCH_TXT: &str = "bench.txt";

fn create(out: &Path, name: &str) -> Result<BufWriter<File>> {
    let p = out.join(name);
    Ok(BufWriter::new(File::create(&p).with_context(|| format!("creating {}", p.display()))?))
}

/// Short fingerprint of everything that determines the prediction data.
pub fn scenario_hash(cfg: &ExperimentConfig) -> String {
    let p = &cfg.prediction;
    let key = format!(
        "{:?}|{}|{}|{}|{}",
        cfg.prediction_scenario(),
        p.history_len,
        p.horizon_len,
        p.train_frac,
        p.dataset
    );
    sha256_hex(key.as_bytes())[..16].to_string()
}

pub fn load_csi(cfg: &ExperimentConfig) -> Result<CsiTensor> {
    let p = &cfg.prediction;
    if p.dataset.is_empty() {
        return Ok(cfg.prediction_scenario().generate()?);
    }
    let csi = CsiTensor::load(&p.dataset).with_context(|| format!("loading dataset {}", p.dataset))?;
    if 2 * csi.coefficients_per_step() != cfg.n_features() {
        bail!(
            "dataset {} has {} coefficients per step; the [prediction] antenna counts give {}",
            p.dataset,
            csi.coefficients_per_step(),
            cfg.n_features() / 2
        );
    }
    Ok(csi)
}

pub fn datasets(cfg: &ExperimentConfig) -> Result<(WindowedDataset, WindowedDataset)> {
    let p = &cfg.prediction;
    Ok(split_windows(&load_csi(cfg)?, p.history_len, p.horizon_len, p.train_frac)?)
}

/// The predictor described by `[model]`, untrained.
pub fn build_predictor(cfg: &ExperimentConfig, st: Standardizer) -> Result<NeuralPredictor> {
    let m = &cfg.model;
    let f = cfg.n_features();
    let mut pred = match m.wiring {
        WiringKind::Dense => NeuralPredictor::new(m.cell, m.units, st, cfg.run.seed)?,
        WiringKind::Ncp => {
            let w = build_wiring(&cfg.wiring_config(f))?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
            let cell = ncp_cell(m.cell, &w, f, &mut rng)?;
            NeuralPredictor::with_cell(cell, Some(w), st)?
        }
    };
    if let Cell::Ltc(c) = &mut pred.cell {
        c.solver = match m.solver {
            Solver::Fused => LtcSolver::Fused { unfolds: m.unfolds },
            Solver::Rk4 => LtcSolver::Rk4 { unfolds: m.unfolds },
        };
    }
    pred.dt = m.dt;
    Ok(pred)
}

pub fn build_baseline(cfg: &ExperimentConfig, st: Standardizer) -> Result<NeuralPredictor> {
    Ok(NeuralPredictor::new(CellKind::Gru, cfg.training.baseline_units, st, cfg.run.seed)?)
}

pub fn gen(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<String>> {
    let csi = cfg.prediction_scenario().generate()?;
    csi.save(out.join(DATASET_FILE))?;
    Ok(vec![DATASET_FILE.into()])
}

/// Trains the configured predictor and the GRU baseline side by side.
pub fn train_both(cfg: &ExperimentConfig, train: &WindowedDataset) -> Result<(Trained, Trained)> {
    let st = Standardizer::fit(train.rows())?;
    let model = build_predictor(cfg, st.clone())?;
    let base = build_baseline(cfg, st)?;
    let (a, b) = rayon::join(
        || train_predictor(model, train, &cfg.train_config(false)),
        || train_predictor(base, train, &cfg.train_config(true)),
    );
    Ok((a.context("training the predictor")?, b.context("training the GRU baseline")?))
}

pub fn train_predict(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<String>> {
    let (train, _) = datasets(cfg)?;
    let (model, base) = train_both(cfg, &train)?;
    model.model.to_checkpoint().save(out.join(PREDICTOR_CKPT))?;
    base.model.to_checkpoint().save(out.join(BASELINE_CKPT))?;
    let mut w = create(out, CURVE_CSV)?;
    writeln!(w, "model,epoch,train_loss,val_loss,kept")?;
    for (name, t) in [("predictor", &model), ("gru_baseline", &base)] {
        for e in &t.curve {
            writeln!(w, "{name},{},{},{},{}", e.epoch, e.train_loss, e.val_loss, e.epoch == t.best_epoch)?;
        }
    }
    w.flush()?;
    Ok(vec![PREDICTOR_CKPT.into(), BASELINE_CKPT.into(), CURVE_CSV.into()])
}

fn load_predictor(out: &Path, name: &str) -> Result<NeuralPredictor> {
    let p = out.join(name);
    let ck = Checkpoint::load(&p).with_context(|| format!("loading {} (run train-predict first)", p.display()))?;
    Ok(NeuralPredictor::from_checkpoint(&ck)?)
}

/// Every scheme's per-horizon MSE on the held-out windows.
pub fn evaluate_all(
    cfg: &ExperimentConfig,
    train: &WindowedDataset,
    test: &WindowedDataset,
    model: &NeuralPredictor,
    baseline: &NeuralPredictor,
) -> Result<Vec<EvalReport>> {
    let (seed, hash) = (cfg.run.seed, scenario_hash(cfg));
    let ar = ArLs::fit(train.rows(), cfg.prediction.ar_order)?;
    if ar.ridge_used {
        eprintln!("ar_ls: normal equations singular, solved with ridge {}", lnn_wireless::predict::RIDGE);
    }
    let mut reports = vec![
        evaluate_mse(&NaiveHold, test, seed, &hash)?,
        evaluate_mse(&ar, test, seed, &hash)?,
        evaluate_mse(model, test, seed, &hash)?,
        evaluate_mse(baseline, test, seed, &hash)?,
    ];
    if reports[2].scheme == "gru" {
        reports[2].scheme = "gru_model".into();
    }
    Ok(reports)
}

pub fn eval_predict(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<String>> {
    let (train, test) = datasets(cfg)?;
    let model = load_predictor(out, PREDICTOR_CKPT)?;
    let base = load_predictor(out, BASELINE_CKPT)?;
    let reports = evaluate_all(cfg, &train, &test, &model, &base)?;
    let mut w = create(out, EVAL_CSV)?;
    write_eval_csv(&reports, &mut w)?;
    w.flush()?;
    Ok(vec![EVAL_CSV.into()])
}

pub fn bf_report_json(cfg: &ExperimentConfig, trace: &SeTrace) -> Result<serde_json::Value> {
    let b = &cfg.beamforming;
    let r = BfReport::from_trace(trace, b.report_window, b.warmup)?;
    Ok(serde_json::json!({
        "seed": cfg.run.seed,
        "n_steps": trace.len(),
        "phase_boundaries": trace.boundaries,
        "noise_power": b.noise_power,
        "power_budget": b.power_budget,
        "wmmse_warm_start": b.wmmse_warm_start,
        "report_window": r.window,
        "warmup": b.warmup,
        "final_mean_se": {
            "glnn": r.glnn_final_mean,
            "wmmse": r.wmmse_final_mean,
            "mrt": r.mrt_final_mean,
            "zf": r.zf_final_mean,
        },
        "glnn_over_wmmse": r.ratio,
        "glnn_surpasses_wmmse": r.surpasses_wmmse_from.is_some(),
        "glnn_surpasses_wmmse_from_step": r.surpasses_wmmse_from,
    }))
}

pub fn run_bf(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<String>> {
    let trace = run_glnn_experiment(&cfg.beamforming_scenario(), &cfg.bf_config())?;
    let mut w = create(out, SE_CSV)?;
    trace.write_csv(&mut w)?;
    w.flush()?;
    let mut w = create(out, SE_SUMMARY_CSV)?;
    trace.write_summary_csv(&mut w)?;
    w.flush()?;
    let report = bf_report_json(cfg, &trace)?;
    std::fs::write(out.join(BF_REPORT), serde_json::to_string_pretty(&report)? + "\n")?;
    Ok(vec![SE_CSV.into(), SE_SUMMARY_CSV.into(), BF_REPORT.into()])
}

pub fn bench_report(cfg: &ExperimentConfig) -> Result<BenchReport> {
    let bn = &cfg.bench;
    let cells = bench_cells(bn.n_trials, bn.warmup, bn.units, bn.n_inputs, bn.unroll_steps, cfg.run.seed)?;
    let training = if bn.train_epochs > 0 {
        let t0 = Instant::now();
        let (train, _) = datasets(cfg)?;
        let model = build_predictor(cfg, Standardizer::fit(train.rows())?)?;
        let mut tc = cfg.train_config(false);
        tc.max_epochs = bn.train_epochs;
        tc.patience = usize::MAX;
        let t = train_predictor(model, &train, &tc)?;
        let total_s = t0.elapsed().as_secs_f64();
        Some(TrainTiming {
            cell: t.model.cell.kind().to_string(),
            epochs: t.curve.len(),
            total_s,
            per_epoch_s: total_s / t.curve.len().max(1) as f64,
        })
    } else {
        None
    };
    Ok(BenchReport { n_trials: bn.n_trials, warmup: bn.warmup, unroll_steps: bn.unroll_steps, cells, training })
}

pub fn bench(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<String>> {
    let r = bench_report(cfg)?;
    std::fs::write(out.join(BENCH_JSON), serde_json::to_string_pretty(&r)? + "\n")?;
    let table = r.table();
    std::fs::write(out.join(BENCH_TXT), &table)?;
    print!("{table}");
    Ok(vec![BENCH_JSON.into(), BENCH_TXT.into()])
}

pub fn plot(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<String>> {
    let inputs: Vec<PathBuf> = if cfg.plot.input.is_empty() {
        [EVAL_CSV, SE_CSV].iter().map(|n| out.join(n)).filter(|p| p.exists()).collect()
    } else {
        vec![PathBuf::from(&cfg.plot.input)]
    };
    if inputs.is_empty() {
        bail!("nothing to plot: no {EVAL_CSV} or {SE_CSV} in {}", out.display());
    }
    let mut written = Vec::new();
    for input in inputs {
        let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("plot").to_string();
        let name = format!("{stem}.svg");
        let kind = if cfg.plot.input.is_empty() { PlotKind::Auto } else { cfg.plot.kind };
        render_plot(&input, kind, &out.join(&name))?;
        written.push(name);
    }
    Ok(written)
}
