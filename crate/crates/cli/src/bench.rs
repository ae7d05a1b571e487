//! Inference latency of the cell kinds and end-to-end training time.

use std::time::Instant;

use anyhow::{bail, Result};
use lnn_core::cells::LtcSolver;
use lnn_core::{Cell, CellKind, Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Variant {
    Cfc,
    LtcFused6,
    LtcFused1,
    LtcRk4,
    Gru,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::Cfc, Variant::LtcFused6, Variant::LtcFused1, Variant::LtcRk4, Variant::Gru];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Cfc => "cfc",
            Variant::LtcFused6 => "ltc_fused6",
            Variant::LtcFused1 => "ltc_fused1",
            Variant::LtcRk4 => "ltc_rk4",
            Variant::Gru => "gru",
        }
    }

    pub fn build(self, rng: &mut impl Rng, n_inputs: usize, units: usize) -> Cell {
        let kind = match self {
            Variant::Cfc => CellKind::Cfc,
            Variant::Gru => CellKind::Gru,
            _ => CellKind::Ltc,
        };
        let mut cell = Cell::new(kind, rng, n_inputs, units, 1);
        if let Cell::Ltc(c) = &mut cell {
            c.solver = match self {
                Variant::LtcFused6 => LtcSolver::Fused { unfolds: 6 },
                Variant::LtcFused1 => LtcSolver::Fused { unfolds: 1 },
                _ => LtcSolver::Rk4 { unfolds: 1 },
            };
        }
        cell
    }
}

/// Microsecond statistics over the kept trials.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Timing {
    pub median_us: f64,
    pub mean_us: f64,
    pub stdev_us: f64,
    pub n_trials: usize,
}

impl Timing {
    pub fn from_samples(mut us: Vec<f64>) -> Self {
        let n = us.len();
        us.sort_by(f64::total_cmp);
        let median_us = if n % 2 == 1 { us[n / 2] } else { 0.5 * (us[n / 2 - 1] + us[n / 2]) };
        let mean_us = us.iter().sum::<f64>() / n as f64;
        let var = us.iter().map(|x| (x - mean_us).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64;
        Self { median_us, mean_us, stdev_us: var.sqrt(), n_trials: n }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CellTiming {
    pub variant: &'static str,
    pub units: usize,
    pub step: Timing,
    pub unrolled: Timing,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrainTiming {
    pub cell: String,
    pub epochs: usize,
    pub total_s: f64,
    pub per_epoch_s: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub n_trials: usize,
    pub warmup: usize,
    pub unroll_steps: usize,
    pub cells: Vec<CellTiming>,
    pub training: Option<TrainTiming>,
}

impl BenchReport {
    pub fn cell(&self, v: Variant) -> Option<&CellTiming> {
        self.cells.iter().find(|c| c.variant == v.name())
    }

    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<12} {:>6} {:>12} {:>22} {:>14} {:>22}\n",
            "cell", "units", "step med us", "step mean±sd us", "unroll med us", "unroll mean±sd us"
        );
        for c in &self.cells {
            s += &format!(
                "{:<12} {:>6} {:>12.2} {:>22} {:>14.2} {:>22}\n",
                c.variant,
                c.units,
                c.step.median_us,
                format!("{:.2}±{:.2}", c.step.mean_us, c.step.stdev_us),
                c.unrolled.median_us,
                format!("{:.2}±{:.2}", c.unrolled.mean_us, c.unrolled.stdev_us),
            );
        }
        if let Some(t) = &self.training {
            s += &format!(
                "training {}: {} epochs in {:.2} s ({:.3} s/epoch)\n",
                t.cell, t.epochs, t.total_s, t.per_epoch_s
            );
        }
        s
    }
}

/// Times `steps` forward steps of `cell` on one sample, parameters already
/// on the tape. Only the steps are inside the clock.
fn time_forward(cell: &Cell, x: &Tensor, steps: usize) -> Result<f64> {
    let mut tape = Tape::new();
    let b = cell.bind(&mut tape, false)?;
    let xv = tape.constant(x.clone());
    let mut h = tape.constant(cell.zero_state(1));
    let t0 = Instant::now();
    for _ in 0..steps {
        h = b.cell.step(&mut tape, h, xv, 0.1)?;
    }
    let y = b.cell.readout(&mut tape, h)?;
    let el = t0.elapsed().as_secs_f64() * 1e6;
    std::hint::black_box(tape.value(y));
    Ok(el)
}

pub fn bench_cells(n_trials: usize, warmup: usize, units: usize, n_inputs: usize, unroll_steps: usize, seed: u64) -> Result<Vec<CellTiming>> {
    if n_trials < 30 {
        bail!("bench needs at least 30 trials, got {n_trials}");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Tensor::matrix(1, n_inputs, (0..n_inputs).map(|_| rng.random_range(-1.0..1.0)).collect())?;
    let cells: Vec<(Variant, Cell)> = Variant::ALL.iter().map(|&v| (v, v.build(&mut rng, n_inputs, units))).collect();
    let mut step = vec![Vec::new(); cells.len()];
    let mut unrolled = vec![Vec::new(); cells.len()];
    // interleave variants so drift in machine load hits all of them alike
    for trial in 0..warmup + n_trials {
        for (i, (_, c)) in cells.iter().enumerate() {
            let a = time_forward(c, &x, 1)?;
            let b = time_forward(c, &x, unroll_steps)?;
            if trial >= warmup {
                step[i].push(a);
                unrolled[i].push(b);
            }
        }
    }
    Ok(cells
        .iter()
        .zip(step.into_iter().zip(unrolled))
        .map(|((v, _), (s, u))| CellTiming {
            variant: v.name(),
            units,
            step: Timing::from_samples(s),
            unrolled: Timing::from_samples(u),
        })
        .collect())
}
