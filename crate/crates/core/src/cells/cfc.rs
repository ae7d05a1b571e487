//! Closed-form continuous-time cell.
//!
//! Three gate networks read `[x, h]`: `f` drives a time gate
//! `σ(-f·dt)`, while `g` and `h_cand` propose candidate states. The update
//! blends the candidates without any ODE solver:
//!
//! ```text
//! h' = σ(-f·dt) ⊙ g + (1 - σ(-f·dt)) ⊙ h_cand
//! ```

use rand::Rng;

use super::gate::{check_dt, BoundGate, BoundReadout, GateWeights, Readout, SparsityMask};
use super::ltc::as_row;
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct CfcCell {
    /// Time-gate network.
    pub f: GateWeights,
    /// First candidate (dominates at small `dt`).
    pub g: GateWeights,
    /// Second candidate (dominates at large `dt`).
    pub h: GateWeights,
    pub readout: Readout,
    pub mask: Option<SparsityMask>,
}

impl CfcCell {
    pub fn new(rng: &mut impl Rng, n_inputs: usize, n_units: usize, n_outputs: usize) -> Self {
        Self {
            f: GateWeights::init(rng, n_inputs, n_units),
            g: GateWeights::init(rng, n_inputs, n_units),
            h: GateWeights::init(rng, n_inputs, n_units),
            readout: Readout::init(rng, n_units, 0, n_outputs),
            mask: None,
        }
    }

    pub fn n_units(&self) -> usize {
        self.f.n_units()
    }

    pub fn n_inputs(&self) -> usize {
        self.f.n_inputs()
    }

    pub(crate) fn named(&self) -> Vec<(String, &Tensor)> {
        let mut v = self.f.named("f");
        v.extend(self.g.named("g"));
        v.extend(self.h.named("h"));
        v.extend(self.readout.named());
        v
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = self.f.tensors_mut();
        v.extend(self.g.tensors_mut());
        v.extend(self.h.tensors_mut());
        v.push(&mut self.readout.w);
        v.push(&mut self.readout.b);
        v
    }

    pub(crate) fn project(&mut self) {
        if let Some(m) = &self.mask {
            self.f.apply_mask(m);
            self.g.apply_mask(m);
            self.h.apply_mask(m);
        }
    }

    pub(crate) fn bind(&self, tape: &mut Tape, trainable: bool, leaves: &mut Vec<Var>) -> Result<BoundCfc> {
        for (name, gw) in [("cfc.f", &self.f), ("cfc.g", &self.g), ("cfc.h", &self.h)] {
            gw.check(name)?;
        }
        let mask = self.mask.as_ref();
        Ok(BoundCfc {
            f: self.f.bind(tape, trainable, mask, leaves)?,
            g: self.g.bind(tape, trainable, mask, leaves)?,
            h: self.h.bind(tape, trainable, mask, leaves)?,
            readout: self.readout.bind(tape, trainable, leaves)?,
        })
    }

    pub fn step(&self, h: &Tensor, x: &Tensor, dt: f64) -> Result<Tensor> {
        let mut tape = Tape::new();
        let b = self.bind(&mut tape, false, &mut Vec::new())?;
        let hv = tape.constant(as_row(h)?);
        let xv = tape.constant(as_row(x)?);
        let out = b.step(&mut tape, hv, xv, dt)?;
        Ok(tape.value(out).clone())
    }

    /// The two candidate states `(g, h_cand)` at `(h, x)`.
    pub fn candidates(&self, h: &Tensor, x: &Tensor) -> Result<(Tensor, Tensor)> {
        let mut tape = Tape::new();
        let b = self.bind(&mut tape, false, &mut Vec::new())?;
        let hv = tape.constant(as_row(h)?);
        let xv = tape.constant(as_row(x)?);
        let (g, hc) = b.candidates(&mut tape, hv, xv)?;
        Ok((tape.value(g).clone(), tape.value(hc).clone()))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BoundCfc {
    f: BoundGate,
    g: BoundGate,
    h: BoundGate,
    pub(crate) readout: BoundReadout,
}

impl BoundCfc {
    fn candidates(&self, tape: &mut Tape, h: Var, x: Var) -> Result<(Var, Var)> {
        let zg = self.g.pre(tape, h, x)?;
        let g = tape.tanh(zg)?;
        let zh = self.h.pre(tape, h, x)?;
        let hc = tape.tanh(zh)?;
        Ok((g, hc))
    }

    pub fn step(&self, tape: &mut Tape, h: Var, x: Var, dt: f64) -> Result<Var> {
        check_dt(dt)?;
        let zf = self.f.pre(tape, h, x)?;
        let arg = tape.scale(zf, -dt)?;
        let gate = tape.sigmoid(arg)?;
        let (g, hc) = self.candidates(tape, h, x)?;
        let diff = tape.sub(g, hc)?;
        let mix = tape.mul(gate, diff)?;
        tape.add(hc, mix)
    }
}
