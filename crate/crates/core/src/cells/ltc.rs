//! Liquid time-constant cell.
//!
//! State dynamics, per neuron:
//!
//! ```text
//! dh/dt = -(1/τ + f(h, x)) ⊙ h + f(h, x) ⊙ A
//! f(h, x) = sigmoid(W_rec·h + W_in·x + b)
//! ```
//!
//! `A` is the reversal potential each neuron is pulled toward while its gate
//! is open. The production solver is the semi-implicit fused step
//! `h' = (h + δ f⊙A) / (1 + δ (1/τ + f))`, which never leaves the box
//! `‖h‖∞ ≤ max(‖h₀‖∞, ‖A‖∞)` for any step size.

use rand::Rng;

use super::gate::{check_dt, uniform_in, BoundGate, BoundReadout, GateWeights, Readout, SparsityMask};
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Lower bound enforced on every time constant after an update.
pub const TAU_MIN: f64 = 1e-3;

pub const DEFAULT_UNFOLDS: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LtcSolver {
    /// Semi-implicit Euler, `unfolds` sub-steps of `dt / unfolds`.
    Fused { unfolds: usize },
    /// Classical Runge–Kutta 4, `unfolds` sub-steps.
    Rk4 { unfolds: usize },
}

impl Default for LtcSolver {
    fn default() -> Self {
        LtcSolver::Fused {
            unfolds: DEFAULT_UNFOLDS,
        }
    }
}

impl LtcSolver {
    fn unfolds(self) -> usize {
        match self {
            LtcSolver::Fused { unfolds } | LtcSolver::Rk4 { unfolds } => unfolds,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LtcCell {
    pub gate: GateWeights,
    /// Time constants in seconds, all `> 0`.
    pub tau: Tensor,
    /// Reversal potentials `A`.
    pub reversal: Tensor,
    pub readout: Readout,
    pub solver: LtcSolver,
    pub mask: Option<SparsityMask>,
}

impl LtcCell {
    pub fn new(rng: &mut impl Rng, n_inputs: usize, n_units: usize, n_outputs: usize) -> Self {
        Self {
            gate: GateWeights::init(rng, n_inputs, n_units),
            tau: uniform_in(rng, n_units, 0.5, 2.0),
            reversal: uniform_in(rng, n_units, -1.0, 1.0),
            readout: Readout::init(rng, n_units, 0, n_outputs),
            solver: LtcSolver::default(),
            mask: None,
        }
    }

    pub fn n_units(&self) -> usize {
        self.gate.n_units()
    }

    pub fn n_inputs(&self) -> usize {
        self.gate.n_inputs()
    }

    pub(crate) fn check(&self) -> Result<()> {
        self.gate.check("ltc")?;
        let n = self.n_units();
        if self.tau.shape() != [n] || self.reversal.shape() != [n] {
            return Err(Error::InvalidShape {
                op: "ltc",
                detail: format!("tau/reversal must have {n} entries"),
            });
        }
        if self.tau.data().iter().any(|&t| t <= 0.0) {
            return Err(Error::InvalidArgument("ltc: time constants must be > 0".into()));
        }
        Ok(())
    }

    pub(crate) fn named(&self) -> Vec<(String, &Tensor)> {
        let mut v = self.gate.named("gate");
        v.push(("tau".into(), &self.tau));
        v.push(("reversal".into(), &self.reversal));
        v.extend(self.readout.named());
        v
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = self.gate.tensors_mut();
        v.push(&mut self.tau);
        v.push(&mut self.reversal);
        v.push(&mut self.readout.w);
        v.push(&mut self.readout.b);
        v
    }

    pub(crate) fn project(&mut self) {
        for t in self.tau.data_mut() {
            *t = t.max(TAU_MIN);
        }
        if let Some(m) = &self.mask {
            self.gate.apply_mask(m);
        }
    }

    pub(crate) fn bind(&self, tape: &mut Tape, trainable: bool, leaves: &mut Vec<Var>) -> Result<BoundLtc> {
        self.check()?;
        let gate = self.gate.bind(tape, trainable, self.mask.as_ref(), leaves)?;
        let (tau, reversal) = if trainable {
            let t = tape.leaf(self.tau.clone());
            let a = tape.leaf(self.reversal.clone());
            leaves.extend([t, a]);
            (t, a)
        } else {
            (tape.constant(self.tau.clone()), tape.constant(self.reversal.clone()))
        };
        let one = tape.scalar(1.0);
        let inv_tau = tape.div(one, tau)?;
        let readout = self.readout.bind(tape, trainable, leaves)?;
        Ok(BoundLtc {
            gate,
            inv_tau,
            reversal,
            readout,
            solver: self.solver,
        })
    }

    fn with_constant_tape(
        &self,
        h: &Tensor,
        x: &Tensor,
        f: impl FnOnce(&mut Tape, &BoundLtc, Var, Var) -> Result<Var>,
    ) -> Result<Tensor> {
        let mut tape = Tape::new();
        let b = self.bind(&mut tape, false, &mut Vec::new())?;
        let hv = tape.constant(as_row(h)?);
        let xv = tape.constant(as_row(x)?);
        let out = f(&mut tape, &b, hv, xv)?;
        Ok(tape.value(out).clone())
    }

    /// `dh/dt` at state `h` (rows are batch entries) and input `x`.
    pub fn derivative(&self, h: &Tensor, x: &Tensor) -> Result<Tensor> {
        self.with_constant_tape(h, x, |t, b, h, x| b.derivative(t, h, x))
    }

    /// One fused step of length `dt`, split into `unfolds` sub-steps.
    pub fn fused_step(&self, h: &Tensor, x: &Tensor, dt: f64, unfolds: usize) -> Result<Tensor> {
        self.with_constant_tape(h, x, |t, b, h, x| b.fused_step(t, h, x, dt, unfolds))
    }

    /// One classical RK4 step of length `dt` with the input held fixed.
    pub fn rk4_step(&self, h: &Tensor, x: &Tensor, dt: f64) -> Result<Tensor> {
        self.with_constant_tape(h, x, |t, b, h, x| b.rk4_step(t, h, x, dt, 1))
    }
}

/// Accepts a vector or a matrix; vectors become a single row.
pub(crate) fn as_row(t: &Tensor) -> Result<Tensor> {
    match t.shape() {
        [n] => t.clone().reshape(vec![1, *n]),
        [_, _] => Ok(t.clone()),
        s => Err(Error::InvalidShape {
            op: "cell",
            detail: format!("state/input must be a vector or matrix, got {s:?}"),
        }),
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BoundLtc {
    gate: BoundGate,
    inv_tau: Var,
    reversal: Var,
    pub(crate) readout: BoundReadout,
    solver: LtcSolver,
}

impl BoundLtc {
    fn gate_open(&self, tape: &mut Tape, h: Var, x: Var) -> Result<Var> {
        let pre = self.gate.pre(tape, h, x)?;
        tape.sigmoid(pre)
    }

    pub fn derivative(&self, tape: &mut Tape, h: Var, x: Var) -> Result<Var> {
        let f = self.gate_open(tape, h, x)?;
        let drive = tape.mul_row(f, self.reversal)?;
        let leak = tape.mul_row(h, self.inv_tau)?;
        let fh = tape.mul(f, h)?;
        let decay = tape.add(leak, fh)?;
        tape.sub(drive, decay)
    }

    pub fn fused_step(&self, tape: &mut Tape, h: Var, x: Var, dt: f64, unfolds: usize) -> Result<Var> {
        check_dt(dt)?;
        if unfolds == 0 {
            return Err(Error::InvalidArgument("unfolds must be >= 1".into()));
        }
        let delta = dt / unfolds as f64;
        let mut h = h;
        for _ in 0..unfolds {
            let f = self.gate_open(tape, h, x)?;
            let fa = tape.mul_row(f, self.reversal)?;
            let fa = tape.scale(fa, delta)?;
            let num = tape.add(h, fa)?;
            let rate = tape.add_row(f, self.inv_tau)?;
            let rate = tape.scale(rate, delta)?;
            let den = tape.add_scalar(rate, 1.0)?;
            h = tape.div(num, den)?;
        }
        Ok(h)
    }

    pub fn rk4_step(&self, tape: &mut Tape, h: Var, x: Var, dt: f64, unfolds: usize) -> Result<Var> {
        check_dt(dt)?;
        if unfolds == 0 {
            return Err(Error::InvalidArgument("unfolds must be >= 1".into()));
        }
        let delta = dt / unfolds as f64;
        let mut h = h;
        for _ in 0..unfolds {
            let k1 = self.derivative(tape, h, x)?;
            let s = tape.scale(k1, 0.5 * delta)?;
            let h2 = tape.add(h, s)?;
            let k2 = self.derivative(tape, h2, x)?;
            let s = tape.scale(k2, 0.5 * delta)?;
            let h3 = tape.add(h, s)?;
            let k3 = self.derivative(tape, h3, x)?;
            let s = tape.scale(k3, delta)?;
            let h4 = tape.add(h, s)?;
            let k4 = self.derivative(tape, h4, x)?;
            let k23 = tape.add(k2, k3)?;
            let k23 = tape.scale(k23, 2.0)?;
            let sum = tape.add(k1, k4)?;
            let sum = tape.add(sum, k23)?;
            let incr = tape.scale(sum, delta / 6.0)?;
            h = tape.add(h, incr)?;
        }
        Ok(h)
    }

    pub fn step(&self, tape: &mut Tape, h: Var, x: Var, dt: f64) -> Result<Var> {
        match self.solver {
            LtcSolver::Fused { unfolds } => self.fused_step(tape, h, x, dt, unfolds),
            LtcSolver::Rk4 { .. } => self.rk4_step(tape, h, x, dt, self.solver.unfolds()),
        }
    }
}
