//! Recurrent CSI predictors trained by unrolled backprop.
//!
//! The cell reads standardized CSI rows; its readout is the increment to
//! the last row, so `x̂[t+1] = x[t] + readout(h[t])`. Past the history the
//! model's own predictions are fed back in (autoregressive rollout).

use lnn_core::cells::{unroll, Binding, LtcSolver};
use lnn_core::checkpoint::Checkpoint;
use lnn_core::{Adam, AdamConfig, Cell, CellKind, Parameters, Tape, Tensor, Var, Wiring};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::{Standardizer, WindowedDataset};
use super::Forecaster;
use crate::error::{Error, Result};

pub const DEFAULT_UNITS: usize = 32;
/// Cell integration interval per CSI sample.
pub const DEFAULT_DT: f64 = 0.5;
/// Fused sub-steps per sample for LTC predictors.
pub const DEFAULT_UNFOLDS: usize = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct NeuralPredictor {
    pub cell: Cell,
    pub standardizer: Standardizer,
    /// Cell integration interval per CSI sample.
    pub dt: f64,
    /// Set for NCP-wired cells.
    pub wiring: Option<Wiring>,
}

impl NeuralPredictor {
    pub fn new(kind: CellKind, n_units: usize, standardizer: Standardizer, seed: u64) -> Result<Self> {
        let f = standardizer.mean.len();
        if n_units == 0 || f == 0 {
            return Err(Error::Invalid("predictor needs units and features".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cell = Cell::new(kind, &mut rng, f, n_units, f);
        if let Cell::Ltc(c) = &mut cell {
            c.solver = LtcSolver::Fused { unfolds: DEFAULT_UNFOLDS };
        }
        Ok(Self { cell, standardizer, dt: DEFAULT_DT, wiring: None })
    }

    /// Wraps a prebuilt cell, e.g. an NCP from `lnn_core::wiring::ncp_cell`.
    pub fn with_cell(cell: Cell, wiring: Option<Wiring>, standardizer: Standardizer) -> Result<Self> {
        let f = standardizer.mean.len();
        if cell.n_inputs() != f || cell.n_outputs() != f {
            return Err(Error::Invalid(format!(
                "cell maps {} inputs to {} outputs, data has {f} features",
                cell.n_inputs(),
                cell.n_outputs()
            )));
        }
        Ok(Self { cell, standardizer, dt: DEFAULT_DT, wiring })
    }

    pub fn n_features(&self) -> usize {
        self.standardizer.mean.len()
    }

    fn check(&self, ds: &WindowedDataset) -> Result<()> {
        if ds.n_features() != self.n_features() {
            return Err(Error::Invalid(format!(
                "model expects {} features, dataset has {}",
                self.n_features(),
                ds.n_features()
            )));
        }
        Ok(())
    }

    /// Standardized rows `[B, F]` for step `k` of the given windows.
    fn batch_rows(&self, ds: &WindowedDataset, idx: &[usize], k: usize) -> Result<Tensor> {
        let f = self.n_features();
        let mut data = Vec::with_capacity(idx.len() * f);
        for &i in idx {
            data.extend(self.standardizer.apply(&ds.rows()[i + k]));
        }
        Ok(Tensor::matrix(idx.len(), f, data)?)
    }

    /// Records the rollout for windows `idx`; returns the standardized
    /// predictions for every horizon.
    fn rollout(&self, tape: &mut Tape, b: &Binding, ds: &WindowedDataset, idx: &[usize]) -> Result<Vec<Var>> {
        let xs = (0..ds.l_h)
            .map(|k| Ok(tape.constant(self.batch_rows(ds, idx, k)?)))
            .collect::<Result<Vec<_>>>()?;
        let h0 = tape.constant(self.cell.zero_state(idx.len()));
        let dts = vec![self.dt; xs.len()];
        let run = unroll(tape, &b.cell, h0, &xs, &dts)?;
        let mut h = run.final_state;
        let mut pred = tape.add(xs[ds.l_h - 1], *run.outputs.last().unwrap())?;
        let mut preds = vec![pred];
        for _ in 1..ds.l_p {
            h = b.cell.step(tape, h, pred, self.dt)?;
            let d = b.cell.readout(tape, h)?;
            pred = tape.add(pred, d)?;
            preds.push(pred);
        }
        Ok(preds)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new(self.cell.clone());
        ck.wiring = self.wiring.clone();
        let n = self.n_features();
        ck.extra = vec![
            ("std_mean".into(), Tensor::vector(self.standardizer.mean.clone()).expect("vector")),
            ("std_scale".into(), Tensor::vector(self.standardizer.std.clone()).expect("vector")),
            ("dt".into(), Tensor::scalar(self.dt)),
        ];
        debug_assert_eq!(ck.extra[0].1.numel(), n);
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let get = |name: &str| ck.extra(name).ok_or_else(|| Error::Format(format!("checkpoint lacks {name}")));
        let mean = get("std_mean")?.data().to_vec();
        let std = get("std_scale")?.data().to_vec();
        let dt = get("dt")?.item();
        if mean.len() != std.len() || mean.len() != ck.cell.n_inputs() || ck.cell.n_outputs() != mean.len() {
            return Err(Error::Format("checkpoint standardizer does not match the cell".into()));
        }
        Ok(Self { cell: ck.cell.clone(), standardizer: Standardizer { mean, std }, dt, wiring: ck.wiring.clone() })
    }
}

impl Forecaster for NeuralPredictor {
    fn name(&self) -> String {
        self.cell.kind().as_str().to_string()
    }

    fn forecast(&self, ds: &WindowedDataset, idx: &[usize]) -> Result<Vec<Vec<Vec<f64>>>> {
        self.check(ds)?;
        let mut tape = Tape::new();
        let b = self.cell.bind(&mut tape, false)?;
        let preds = self.rollout(&mut tape, &b, ds, idx)?;
        let f = self.n_features();
        Ok((0..idx.len())
            .map(|w| {
                preds
                    .iter()
                    .map(|&p| self.standardizer.invert(&tape.value(p).data()[w * f..(w + 1) * f]))
                    .collect()
            })
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation improvement before stopping.
    pub patience: usize,
    /// Trailing share of the training windows held out for early stopping.
    pub val_frac: f64,
    /// Caps the batches drawn per epoch; `None` uses every window.
    pub batches_per_epoch: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.005,
            batch_size: 64,
            max_epochs: 300,
            patience: 30,
            val_frac: 0.2,
            batches_per_epoch: Some(50),
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean standardized loss over the epoch's batches.
    pub train_loss: f64,
    /// Standardized mean MSE on the held-out windows, NaN without them.
    pub val_loss: f64,
}

#[derive(Clone, Debug)]
pub struct Trained {
    pub model: NeuralPredictor,
    pub curve: Vec<EpochLog>,
    /// Epoch whose parameters were kept (0 = the initialization).
    pub best_epoch: usize,
}

fn mean_loss(tape: &mut Tape, preds: &[Var], targets: &[Var]) -> Result<Var> {
    let mut total: Option<Var> = None;
    for (&p, &t) in preds.iter().zip(targets) {
        let m = tape.mse(p, t)?;
        total = Some(match total {
            Some(s) => tape.add(s, m)?,
            None => m,
        });
    }
    Ok(tape.scale(total.expect("horizon >= 1"), 1.0 / preds.len() as f64)?)
}

impl NeuralPredictor {
    fn batch_loss(&self, ds: &WindowedDataset, idx: &[usize], trainable: bool) -> Result<(f64, Vec<Tensor>)> {
        let mut tape = Tape::new();
        let b = self.cell.bind(&mut tape, trainable)?;
        let preds = self.rollout(&mut tape, &b, ds, idx)?;
        let targets = (0..ds.l_p)
            .map(|k| Ok(tape.constant(self.batch_rows(ds, idx, ds.l_h + k)?)))
            .collect::<Result<Vec<_>>>()?;
        let loss = mean_loss(&mut tape, &preds, &targets)?;
        let value = tape.value(loss).item();
        if !value.is_finite() {
            return Err(Error::Numerical(format!("non-finite training loss {value}")));
        }
        if !trainable {
            return Ok((value, Vec::new()));
        }
        let g = tape.backward(loss)?;
        Ok((value, b.params.iter().map(|&p| g.get(p).clone()).collect()))
    }

    fn eval_loss(&self, ds: &WindowedDataset, idx: &[usize], batch: usize) -> Result<f64> {
        let mut sum = 0.0;
        for chunk in idx.chunks(batch.max(256)) {
            sum += self.batch_loss(ds, chunk, false)?.0 * chunk.len() as f64;
        }
        Ok(sum / idx.len() as f64)
    }
}

/// Minimizes the mean MSE over all horizons with Adam on shuffled
/// minibatches, keeping the parameters with the best held-out loss.
pub fn train_predictor(model: NeuralPredictor, ds: &WindowedDataset, cfg: &TrainConfig) -> Result<Trained> {
    model.check(ds)?;
    if cfg.batch_size == 0 || !(cfg.lr > 0.0) || !(0.0..1.0).contains(&cfg.val_frac) {
        return Err(Error::Config("train: batch_size, lr and val_frac out of range".into()));
    }
    if cfg.max_epochs == 0 {
        return Ok(Trained { model, curve: Vec::new(), best_epoch: 0 });
    }
    // held-out windows start after the last training window ends
    let n = ds.len();
    let n_val = (n as f64 * cfg.val_frac).round() as usize;
    let span = ds.l_h + ds.l_p;
    let n_fit = if n_val > 0 { n.saturating_sub(n_val + span - 1) } else { n };
    if n_fit == 0 {
        return Err(Error::Invalid(format!("{n} windows leave none to fit on")));
    }
    let mut fit: Vec<usize> = (0..n_fit).collect();
    let val: Vec<usize> = if n_val > 0 { (n - n_val..n).collect() } else { Vec::new() };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(AdamConfig::with_lr(cfg.lr));
    let mut model = model;
    let mut best = (f64::INFINITY, 0, model.clone());
    if !val.is_empty() {
        best.0 = model.eval_loss(ds, &val, cfg.batch_size)?;
    }
    let mut curve = Vec::new();
    for epoch in 1..=cfg.max_epochs {
        fit.shuffle(&mut rng);
        let n_batches = fit.len().div_ceil(cfg.batch_size);
        let n_batches = cfg.batches_per_epoch.map_or(n_batches, |c| c.min(n_batches));
        let mut sum = 0.0;
        for (bi, idx) in fit.chunks(cfg.batch_size).take(n_batches).enumerate() {
            let (loss, grads) = model
                .batch_loss(ds, idx, true)
                .map_err(|e| Error::Numerical(format!("epoch {epoch} batch {bi}: {e}")))?;
            sum += loss;
            let mut params = model.cell.params_mut();
            adam.step(&mut params, &grads)?;
            model.cell.project();
        }
        let train_loss = sum / n_batches as f64;
        let val_loss = if val.is_empty() { f64::NAN } else { model.eval_loss(ds, &val, cfg.batch_size)? };
        curve.push(EpochLog { epoch, train_loss, val_loss });
        if val.is_empty() {
            best = (train_loss, epoch, model.clone());
        } else if val_loss < best.0 {
            best = (val_loss, epoch, model.clone());
        } else if epoch - best.1 >= cfg.patience {
            break;
        }
    }
    Ok(Trained { model: best.2, curve, best_epoch: best.1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sinusoid(n: usize) -> WindowedDataset {
        let rows = (0..n)
            .map(|t| {
                let p = 2.0 * std::f64::consts::PI * 0.03 * t as f64;
                vec![p.cos(), p.sin()]
            })
            .collect();
        WindowedDataset::from_rows(rows, 0, 20, 5).unwrap()
    }

    fn model(kind: CellKind, ds: &WindowedDataset) -> NeuralPredictor {
        NeuralPredictor::new(kind, 8, Standardizer::fit(ds.rows()).unwrap(), 4).unwrap()
    }

    #[test]
    fn zero_epochs_keep_the_model() {
        let ds = sinusoid(200);
        let m = model(CellKind::Ltc, &ds);
        let cfg = TrainConfig { max_epochs: 0, ..Default::default() };
        let t = train_predictor(m.clone(), &ds, &cfg).unwrap();
        assert_eq!(t.model, m);
        assert!(t.curve.is_empty());
    }

    #[test]
    fn learns_a_sinusoid() {
        let ds = sinusoid(400);
        let cfg = TrainConfig { max_epochs: 200, val_frac: 0.0, batch_size: 32, lr: 0.01, ..Default::default() };
        let t = train_predictor(model(CellKind::Ltc, &ds), &ds, &cfg).unwrap();
        let last = t.curve.last().unwrap();
        assert!(last.epoch <= 200);
        let all: Vec<usize> = (0..ds.len()).collect();
        let final_mse = t.model.eval_loss(&ds, &all, 64).unwrap();
        assert!(final_mse < 0.01, "train mse {final_mse}");
    }

    #[test]
    fn same_seed_same_curve() {
        let ds = sinusoid(300);
        let cfg = TrainConfig { max_epochs: 5, ..Default::default() };
        let a = train_predictor(model(CellKind::Ltc, &ds), &ds, &cfg).unwrap();
        let b = train_predictor(model(CellKind::Ltc, &ds), &ds, &cfg).unwrap();
        assert_eq!(a.curve, b.curve);
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn rejects_mismatched_features() {
        let ds = sinusoid(100);
        let m = NeuralPredictor::new(CellKind::Gru, 4, Standardizer::identity(3), 0).unwrap();
        assert!(train_predictor(m.clone(), &ds, &TrainConfig::default()).is_err());
        assert!(m.forecast(&ds, &[0]).is_err());
    }

    #[test]
    fn gru_forecasts_have_the_right_shape() {
        let ds = sinusoid(60);
        let m = model(CellKind::Gru, &ds);
        let idx: Vec<usize> = (0..ds.len()).collect();
        let out = m.forecast(&ds, &idx).unwrap();
        assert_eq!(out.len(), ds.len());
        assert!(out.iter().all(|w| w.len() == 5 && w.iter().all(|r| r.len() == 2 && r.iter().all(|x| x.is_finite()))));
    }

    #[test]
    fn ncp_predictor_keeps_its_wiring() {
        use lnn_core::wiring::{build_wiring, ncp_cell, WiringConfig};
        let ds = sinusoid(80);
        let w = build_wiring(&WiringConfig::default_for(2, 1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cell = ncp_cell(CellKind::Cfc, &w, 2, &mut rng).unwrap();
        let m = NeuralPredictor::with_cell(cell, Some(w), Standardizer::fit(ds.rows()).unwrap()).unwrap();
        let mut buf = Vec::new();
        m.to_checkpoint().write_to(&mut buf).unwrap();
        let back = NeuralPredictor::from_checkpoint(&Checkpoint::read_from(&mut buf.as_slice()).unwrap()).unwrap();
        assert_eq!(back, m);
        let cfg = TrainConfig { max_epochs: 2, ..Default::default() };
        let t = train_predictor(back, &ds, &cfg).unwrap();
        assert_eq!(t.curve.len(), 2);
        assert!(NeuralPredictor::with_cell(t.model.cell, None, Standardizer::identity(3)).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let ds = sinusoid(60);
        let m = model(CellKind::Ltc, &ds);
        let mut buf = Vec::new();
        m.to_checkpoint().write_to(&mut buf).unwrap();
        let ck = Checkpoint::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(NeuralPredictor::from_checkpoint(&ck).unwrap(), m);
    }
}
