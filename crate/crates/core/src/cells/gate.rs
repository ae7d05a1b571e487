use rand::Rng;

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Uniform `[-s, s]` init for an `rows × cols` matrix.
pub(crate) fn uniform(rng: &mut impl Rng, shape: &[usize], s: f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-s..=s)).collect();
    Tensor::new(shape.to_vec(), data).expect("finite init")
}

pub(crate) fn uniform_in(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Tensor {
    let data = (0..n).map(|_| rng.random_range(lo..=hi)).collect();
    Tensor::vector(data).expect("finite init")
}

/// 0/1 connectivity masks over the input and recurrent weights of a cell.
///
/// Rows index the receiving unit; columns the sending input or unit.
#[derive(Clone, Debug, PartialEq)]
pub struct SparsityMask {
    pub input: Tensor,
    pub recurrent: Tensor,
}

/// Affine pre-activation `x·W_inᵀ + h·W_recᵀ + b` of one gate.
#[derive(Clone, Debug, PartialEq)]
pub struct GateWeights {
    /// `n_units × n_inputs`
    pub w_in: Tensor,
    /// `n_units × n_units`
    pub w_rec: Tensor,
    /// `n_units`
    pub b: Tensor,
}

impl GateWeights {
    pub fn init(rng: &mut impl Rng, n_inputs: usize, n_units: usize) -> Self {
        let s = 1.0 / ((n_inputs + n_units) as f64).sqrt();
        Self {
            w_in: uniform(rng, &[n_units, n_inputs], s),
            w_rec: uniform(rng, &[n_units, n_units], s),
            b: Tensor::zeros(&[n_units]),
        }
    }

    pub fn zeros(n_inputs: usize, n_units: usize) -> Self {
        Self {
            w_in: Tensor::zeros(&[n_units, n_inputs]),
            w_rec: Tensor::zeros(&[n_units, n_units]),
            b: Tensor::zeros(&[n_units]),
        }
    }

    pub fn n_units(&self) -> usize {
        self.b.numel()
    }

    pub fn n_inputs(&self) -> usize {
        self.w_in.shape()[1]
    }

    pub(crate) fn check(&self, op: &'static str) -> Result<()> {
        let (n, i) = (self.n_units(), self.n_inputs());
        if self.w_in.shape() != [n, i] || self.w_rec.shape() != [n, n] || self.b.shape() != [n] {
            return Err(Error::InvalidShape {
                op,
                detail: format!(
                    "gate shapes w_in {:?} w_rec {:?} b {:?} are inconsistent",
                    self.w_in.shape(),
                    self.w_rec.shape(),
                    self.b.shape()
                ),
            });
        }
        Ok(())
    }

    pub(crate) fn named<'a>(&'a self, prefix: &str) -> Vec<(String, &'a Tensor)> {
        vec![
            (format!("{prefix}.w_in"), &self.w_in),
            (format!("{prefix}.w_rec"), &self.w_rec),
            (format!("{prefix}.b"), &self.b),
        ]
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.w_in, &mut self.w_rec, &mut self.b]
    }

    pub(crate) fn apply_mask(&mut self, mask: &SparsityMask) {
        for (w, m) in [(&mut self.w_in, &mask.input), (&mut self.w_rec, &mask.recurrent)] {
            for (v, &k) in w.data_mut().iter_mut().zip(m.data()) {
                *v *= k;
            }
        }
    }

    pub(crate) fn bind(
        &self,
        tape: &mut Tape,
        trainable: bool,
        mask: Option<&SparsityMask>,
        leaves: &mut Vec<Var>,
    ) -> Result<BoundGate> {
        let mut put = |tape: &mut Tape, t: &Tensor| {
            if trainable {
                let v = tape.leaf(t.clone());
                leaves.push(v);
                v
            } else {
                tape.constant(t.clone())
            }
        };
        let mut w_in = put(tape, &self.w_in);
        let mut w_rec = put(tape, &self.w_rec);
        let b = put(tape, &self.b);
        if let Some(m) = mask {
            let mi = tape.constant(m.input.clone());
            let mr = tape.constant(m.recurrent.clone());
            w_in = tape.mul(w_in, mi)?;
            w_rec = tape.mul(w_rec, mr)?;
        }
        Ok(BoundGate {
            w_in_t: tape.transpose(w_in)?,
            w_rec_t: tape.transpose(w_rec)?,
            b,
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct BoundGate {
    w_in_t: Var,
    w_rec_t: Var,
    b: Var,
}

impl BoundGate {
    pub(crate) fn pre(&self, tape: &mut Tape, h: Var, x: Var) -> Result<Var> {
        let a = tape.matmul(x, self.w_in_t)?;
        let r = tape.matmul(h, self.w_rec_t)?;
        let s = tape.add(a, r)?;
        tape.add_row(s, self.b)
    }
}

/// Linear map from the trailing units of the state to the output.
#[derive(Clone, Debug, PartialEq)]
pub struct Readout {
    /// `n_outputs × (n_units - from)`
    pub w: Tensor,
    /// `n_outputs`
    pub b: Tensor,
    /// First unit fed to the readout.
    pub from: usize,
}

impl Readout {
    pub fn init(rng: &mut impl Rng, n_units: usize, from: usize, n_outputs: usize) -> Self {
        let n_src = n_units - from;
        let s = 1.0 / (n_src as f64).sqrt();
        Self {
            w: uniform(rng, &[n_outputs, n_src], s),
            b: Tensor::zeros(&[n_outputs]),
            from,
        }
    }

    pub fn n_outputs(&self) -> usize {
        self.b.numel()
    }

    pub(crate) fn named(&self) -> Vec<(String, &Tensor)> {
        vec![("readout.w".into(), &self.w), ("readout.b".into(), &self.b)]
    }

    pub(crate) fn bind(&self, tape: &mut Tape, trainable: bool, leaves: &mut Vec<Var>) -> Result<BoundReadout> {
        let (w, b) = if trainable {
            let w = tape.leaf(self.w.clone());
            let b = tape.leaf(self.b.clone());
            leaves.extend([w, b]);
            (w, b)
        } else {
            (tape.constant(self.w.clone()), tape.constant(self.b.clone()))
        };
        Ok(BoundReadout {
            w_t: tape.transpose(w)?,
            b,
            from: self.from,
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct BoundReadout {
    w_t: Var,
    b: Var,
    from: usize,
}

impl BoundReadout {
    pub(crate) fn apply(&self, tape: &mut Tape, h: Var) -> Result<Var> {
        let n = tape.value(h).dims2().map_or(0, |d| d.1);
        let src = if self.from == 0 {
            h
        } else {
            tape.slice_cols(h, self.from, n)?
        };
        let y = tape.matmul(src, self.w_t)?;
        tape.add_row(y, self.b)
    }
}

pub(crate) fn check_dt(dt: f64) -> Result<()> {
    if dt >= 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("dt must be a finite value >= 0, got {dt}")))
    }
}
