//! Gated recurrent unit, the discrete-time baseline.
//!
//! ```text
//! z  = σ(W_z x + U_z h + b_z)
//! r  = σ(W_r x + U_r h + b_r)
//! n  = tanh(W_n x + U_n (r ⊙ h) + b_n)
//! h' = (1 - z) ⊙ n + z ⊙ h
//! ```

use rand::Rng;

use super::gate::{BoundGate, BoundReadout, GateWeights, Readout};
use super::ltc::as_row;
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct GruCell {
    pub update: GateWeights,
    pub reset: GateWeights,
    pub candidate: GateWeights,
    pub readout: Readout,
}

impl GruCell {
    pub fn new(rng: &mut impl Rng, n_inputs: usize, n_units: usize, n_outputs: usize) -> Self {
        Self {
            update: GateWeights::init(rng, n_inputs, n_units),
            reset: GateWeights::init(rng, n_inputs, n_units),
            candidate: GateWeights::init(rng, n_inputs, n_units),
            readout: Readout::init(rng, n_units, 0, n_outputs),
        }
    }

    pub fn n_units(&self) -> usize {
        self.update.n_units()
    }

    pub fn n_inputs(&self) -> usize {
        self.update.n_inputs()
    }

    pub(crate) fn named(&self) -> Vec<(String, &Tensor)> {
        let mut v = self.update.named("update");
        v.extend(self.reset.named("reset"));
        v.extend(self.candidate.named("candidate"));
        v.extend(self.readout.named());
        v
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = self.update.tensors_mut();
        v.extend(self.reset.tensors_mut());
        v.extend(self.candidate.tensors_mut());
        v.push(&mut self.readout.w);
        v.push(&mut self.readout.b);
        v
    }

    pub(crate) fn bind(&self, tape: &mut Tape, trainable: bool, leaves: &mut Vec<Var>) -> Result<BoundGru> {
        for (name, gw) in [
            ("gru.update", &self.update),
            ("gru.reset", &self.reset),
            ("gru.candidate", &self.candidate),
        ] {
            gw.check(name)?;
        }
        Ok(BoundGru {
            update: self.update.bind(tape, trainable, None, leaves)?,
            reset: self.reset.bind(tape, trainable, None, leaves)?,
            candidate: self.candidate.bind(tape, trainable, None, leaves)?,
            readout: self.readout.bind(tape, trainable, leaves)?,
        })
    }

    pub fn step(&self, h: &Tensor, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let b = self.bind(&mut tape, false, &mut Vec::new())?;
        let hv = tape.constant(as_row(h)?);
        let xv = tape.constant(as_row(x)?);
        let out = b.step(&mut tape, hv, xv)?;
        Ok(tape.value(out).clone())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BoundGru {
    update: BoundGate,
    reset: BoundGate,
    candidate: BoundGate,
    pub(crate) readout: BoundReadout,
}

impl BoundGru {
    pub fn step(&self, tape: &mut Tape, h: Var, x: Var) -> Result<Var> {
        let zp = self.update.pre(tape, h, x)?;
        let z = tape.sigmoid(zp)?;
        let rp = self.reset.pre(tape, h, x)?;
        let r = tape.sigmoid(rp)?;
        let rh = tape.mul(r, h)?;
        let np = self.candidate.pre(tape, rh, x)?;
        let n = tape.tanh(np)?;
        // h' = n + z ⊙ (h - n)
        let d = tape.sub(h, n)?;
        let zd = tape.mul(z, d)?;
        tape.add(n, zd)
    }
}
