//! Recurrent cells: liquid time-constant (LTC), closed-form continuous-time
//! (CfC) and the GRU baseline, plus sequence unrolling.
//!
//! Cells are plain parameter containers. To run one, [`Cell::bind`] it to a
//! [`Tape`]; the returned [`Binding`] steps batched states (`batch × units`)
//! on that tape, and lists the leaf variables holding the parameters when
//! bound as trainable.

mod cfc;
mod gate;
mod gru;
mod ltc;


pub use cfc::{BoundCfc, CfcCell};
pub use gate::{GateWeights, Readout, SparsityMask};
pub use gru::{BoundGru, GruCell};
pub use ltc::{BoundLtc, LtcCell, LtcSolver, DEFAULT_UNFOLDS, TAU_MIN};

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::autodiff::{Parameters, Tape, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CellKind {
    Ltc,
    Cfc,
    Gru,
}

impl CellKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CellKind::Ltc => "ltc",
            CellKind::Cfc => "cfc",
            CellKind::Gru => "gru",
        }
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CellKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ltc" => Ok(CellKind::Ltc),
            "cfc" => Ok(CellKind::Cfc),
            "gru" => Ok(CellKind::Gru),
            other => Err(Error::InvalidArgument(format!("unknown cell kind {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Ltc(LtcCell),
    Cfc(CfcCell),
    Gru(GruCell),
}

impl Cell {
    pub fn new(kind: CellKind, rng: &mut impl Rng, n_inputs: usize, n_units: usize, n_outputs: usize) -> Self {
        match kind {
            CellKind::Ltc => Cell::Ltc(LtcCell::new(rng, n_inputs, n_units, n_outputs)),
            CellKind::Cfc => Cell::Cfc(CfcCell::new(rng, n_inputs, n_units, n_outputs)),
            CellKind::Gru => Cell::Gru(GruCell::new(rng, n_inputs, n_units, n_outputs)),
        }
    }

    pub fn kind(&self) -> CellKind {
        match self {
            Cell::Ltc(_) => CellKind::Ltc,
            Cell::Cfc(_) => CellKind::Cfc,
            Cell::Gru(_) => CellKind::Gru,
        }
    }

    pub fn n_units(&self) -> usize {
        match self {
            Cell::Ltc(c) => c.n_units(),
            Cell::Cfc(c) => c.n_units(),
            Cell::Gru(c) => c.n_units(),
        }
    }

    pub fn n_inputs(&self) -> usize {
        match self {
            Cell::Ltc(c) => c.n_inputs(),
            Cell::Cfc(c) => c.n_inputs(),
            Cell::Gru(c) => c.n_inputs(),
        }
    }

    pub fn readout(&self) -> &Readout {
        match self {
            Cell::Ltc(c) => &c.readout,
            Cell::Cfc(c) => &c.readout,
            Cell::Gru(c) => &c.readout,
        }
    }

    pub fn readout_mut(&mut self) -> &mut Readout {
        match self {
            Cell::Ltc(c) => &mut c.readout,
            Cell::Cfc(c) => &mut c.readout,
            Cell::Gru(c) => &mut c.readout,
        }
    }

    pub fn n_outputs(&self) -> usize {
        self.readout().n_outputs()
    }

    pub fn mask(&self) -> Option<&SparsityMask> {
        match self {
            Cell::Ltc(c) => c.mask.as_ref(),
            Cell::Cfc(c) => c.mask.as_ref(),
            Cell::Gru(_) => None,
        }
    }

    /// Resting state, all zeros.
    pub fn zero_state(&self, batch: usize) -> Tensor {
        Tensor::zeros(&[batch, self.n_units()])
    }

    /// Re-establishes parameter constraints after an optimizer update:
    /// clamps time constants to [`TAU_MIN`] and re-zeroes masked weights.
    pub fn project(&mut self) {
        match self {
            Cell::Ltc(c) => c.project(),
            Cell::Cfc(c) => c.project(),
            Cell::Gru(_) => {}
        }
    }

    /// Records the parameters on `tape`. With `trainable` they become leaves
    /// (listed in [`Parameters`] order in [`Binding::params`]); otherwise
    /// constants.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Result<Binding> {
        let mut params = Vec::new();
        let cell = match self {
            Cell::Ltc(c) => BoundCell::Ltc(c.bind(tape, trainable, &mut params)?),
            Cell::Cfc(c) => BoundCell::Cfc(c.bind(tape, trainable, &mut params)?),
            Cell::Gru(c) => BoundCell::Gru(c.bind(tape, trainable, &mut params)?),
        };
        Ok(Binding { cell, params })
    }

    /// Unrolls over concrete tensors; returns per-step readouts and the
    /// final state.
    pub fn unroll_values(&self, h0: &Tensor, inputs: &[Tensor], dts: &[f64]) -> Result<(Vec<Tensor>, Tensor)> {
        let mut tape = Tape::new();
        let b = self.bind(&mut tape, false)?;
        let h = tape.constant(ltc::as_row(h0)?);
        let xs = inputs
            .iter()
            .map(|x| Ok(tape.constant(ltc::as_row(x)?)))
            .collect::<Result<Vec<_>>>()?;
        let out = unroll(&mut tape, &b.cell, h, &xs, dts)?;
        let ys = out.outputs.iter().map(|&v| tape.value(v).clone()).collect();
        Ok((ys, tape.value(out.final_state).clone()))
    }
}

impl Parameters for Cell {
    fn named_params(&self) -> Vec<(String, &Tensor)> {
        match self {
            Cell::Ltc(c) => c.named(),
            Cell::Cfc(c) => c.named(),
            Cell::Gru(c) => c.named(),
        }
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Cell::Ltc(c) => c.tensors_mut(),
            Cell::Cfc(c) => c.tensors_mut(),
            Cell::Gru(c) => c.tensors_mut(),
        }
    }
}

/// A cell recorded on a tape.
#[derive(Clone, Copy, Debug)]
pub enum BoundCell {
    Ltc(BoundLtc),
    Cfc(BoundCfc),
    Gru(BoundGru),
}

impl BoundCell {
    /// Advances the state by `dt` seconds with input `x` held constant.
    /// The GRU ignores `dt`.
    pub fn step(&self, tape: &mut Tape, h: Var, x: Var, dt: f64) -> Result<Var> {
        match self {
            BoundCell::Ltc(c) => c.step(tape, h, x, dt),
            BoundCell::Cfc(c) => c.step(tape, h, x, dt),
            BoundCell::Gru(c) => c.step(tape, h, x),
        }
    }

    pub fn readout(&self, tape: &mut Tape, h: Var) -> Result<Var> {
        match self {
            BoundCell::Ltc(c) => c.readout.apply(tape, h),
            BoundCell::Cfc(c) => c.readout.apply(tape, h),
            BoundCell::Gru(c) => c.readout.apply(tape, h),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Binding {
    pub cell: BoundCell,
    /// Parameter leaves, empty when bound as constants.
    pub params: Vec<Var>,
}

#[derive(Clone, Debug)]
pub struct Unrolled {
    /// Readout after every step.
    pub outputs: Vec<Var>,
    pub final_state: Var,
}

/// Applies `cell` along `inputs`, one step per input with the matching
/// interval from `dts`.
pub fn unroll(tape: &mut Tape, cell: &BoundCell, h0: Var, inputs: &[Var], dts: &[f64]) -> Result<Unrolled> {
    if inputs.len() != dts.len() {
        return Err(Error::InvalidArgument(format!(
            "unroll: {} inputs but {} intervals",
            inputs.len(),
            dts.len()
        )));
    }
    let mut h = h0;
    let mut outputs = Vec::with_capacity(inputs.len());
    for (&x, &dt) in inputs.iter().zip(dts) {
        h = cell.step(tape, h, x, dt)?;
        outputs.push(cell.readout(tape, h)?);
    }
    Ok(Unrolled {
        outputs,
        final_state: h,
    })
}

/// Compares reverse-mode parameter gradients of an unrolled sequence loss
/// with central finite differences, in the norm-wise relative form used by
/// [`crate::autodiff::grad_check`].
///
/// The loss is the mean over steps of `mse(readout_t, targets[t])`.
pub fn unroll_grad_check(
    cell: &Cell,
    h0: &Tensor,
    inputs: &[Tensor],
    dts: &[f64],
    targets: &[Tensor],
    step: f64,
) -> Result<f64> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("grad_check: step {step} must be > 0")));
    }
    if targets.len() != inputs.len() || inputs.is_empty() {
        return Err(Error::InvalidArgument("unroll_grad_check: need one target per input".into()));
    }
    let loss = |cell: &Cell, trainable: bool| -> Result<(f64, Vec<Tensor>)> {
        let mut tape = Tape::new();
        let b = cell.bind(&mut tape, trainable)?;
        let h = tape.constant(ltc::as_row(h0)?);
        let xs = inputs
            .iter()
            .map(|x| Ok(tape.constant(ltc::as_row(x)?)))
            .collect::<Result<Vec<_>>>()?;
        let out = unroll(&mut tape, &b.cell, h, &xs, dts)?;
        let mut terms = Vec::with_capacity(out.outputs.len());
        for (&y, t) in out.outputs.iter().zip(targets) {
            let tv = tape.constant(ltc::as_row(t)?);
            terms.push(tape.mse(y, tv)?);
        }
        let mut total = terms[0];
        for &v in &terms[1..] {
            total = tape.add(total, v)?;
        }
        let total = tape.scale(total, 1.0 / terms.len() as f64)?;
        let value = tape.value(total).item();
        if !trainable {
            return Ok((value, Vec::new()));
        }
        let g = tape.backward(total)?;
        Ok((value, b.params.iter().map(|&p| g.get(p).clone()).collect()))
    };

    let (_, analytic) = loss(cell, true)?;
    let mut work = cell.clone();
    let mut numeric = Vec::new();
    let n_params = work.params_mut().len();
    for k in 0..n_params {
        let len = work.params_mut()[k].numel();
        for i in 0..len {
            let x0 = work.params_mut()[k].data()[i];
            work.params_mut()[k].data_mut()[i] = x0 + step;
            let fp = loss(&work, false)?.0;
            work.params_mut()[k].data_mut()[i] = x0 - step;
            let fm = loss(&work, false)?.0;
            work.params_mut()[k].data_mut()[i] = x0;
            numeric.push((fp - fm) / (2.0 * step));
        }
    }
    let analytic: Vec<f64> = analytic.iter().flat_map(|t| t.data().to_vec()).collect();
    let diff = analytic
        .iter()
        .zip(&numeric)
        .fold(0.0f64, |m, (a, n)| m.max((a - n).abs()));
    let scale = analytic.iter().chain(&numeric).fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(if scale == 0.0 { diff } else { diff / scale })
}
