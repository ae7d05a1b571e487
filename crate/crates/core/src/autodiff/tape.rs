//! Define-by-run reverse-mode differentiation.
//!
//! A [`Tape`] owns every value produced during a forward pass. Operations
//! return [`Var`] handles; [`Tape::backward`] walks the record in reverse
//! and returns [`Gradients`] for every leaf created with [`Tape::leaf`].
//!
//! ```
//! use lnn_core::autodiff::{Tape, Tensor};
//!
//! let mut tape = Tape::new();
//! let x = tape.leaf(Tensor::vector(vec![1.0, -2.0, 3.0]).unwrap());
//! let sq = tape.square(x).unwrap();
//! let loss = tape.sum(sq).unwrap();
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.get(x).data(), &[2.0, -4.0, 6.0]);
//! ```

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::DMatrix;

use super::tensor::Tensor;
use crate::error::{Error, Result};

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

/// Handle to a value recorded on a specific [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var {
    tape: u64,
    index: usize,
}

impl Var {
    /// Position of the node in its tape (the node id).
    pub fn id(self) -> usize {
        self.index
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryKind {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnaryKind {
    Sigmoid,
    Tanh,
    Exp,
    Neg,
    Log,
    Abs,
    Square,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReduceKind {
    Sum,
    Mean,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Axis {
    Rows,
    Cols,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Constant,
    MatMul(Var, Var),
    Transpose(Var),
    Binary(BinaryKind, Var, Var),
    Unary(UnaryKind, Var),
    /// Matrix combined with a row vector repeated over every row.
    RowBroadcast(BinaryKind, Var, Var),
    Reduce(ReduceKind, Var),
    Mse(Var, Var),
    SliceCols { src: Var, start: usize },
    Reshape(Var),
    Concat { axis: Axis, parts: Vec<Var> },
    LogDet { src: Var, inverse: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Ordered record of every operation in one forward pass.
///
/// Records only ever refer to earlier nodes, so the record is always in
/// topological order. A tape is a single-threaded context; build a fresh
/// one per forward pass.
#[derive(Debug)]
pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

fn dims2(op: &'static str, t: &Tensor) -> Result<(usize, usize)> {
    match t.shape() {
        [r, c] => Ok((*r, *c)),
        s => Err(Error::InvalidShape {
            op,
            detail: format!("expected a matrix, got shape {s:?}"),
        }),
    }
}

fn check_finite(op: &'static str, data: &[f64]) -> Result<()> {
    if data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { op })
    }
}

fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += aip * bv;
            }
        }
    }
    out
}

fn transpose_raw(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = a[i * cols + j];
        }
    }
    out
}

fn binary_apply(kind: BinaryKind, a: f64, b: f64) -> f64 {
    match kind {
        BinaryKind::Add => a + b,
        BinaryKind::Sub => a - b,
        BinaryKind::Mul => a * b,
        BinaryKind::Div => a / b,
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            tape: self.id,
            index: self.nodes.len() - 1,
        }
    }

    fn check(&self, v: Var) -> Result<&Node> {
        if v.tape != self.id || v.index >= self.nodes.len() {
            return Err(Error::NotOnTape(v.index));
        }
        Ok(&self.nodes[v.index])
    }

    fn grad_of(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.index].requires_grad)
    }

    /// Differentiable input.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Input that receives no gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Constant, false)
    }

    pub fn scalar(&mut self, v: f64) -> Var {
        self.constant(Tensor::scalar(v))
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.check(v).expect("var from another tape").value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.index].requires_grad
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = dims2("matmul", &self.check(a)?.value)?;
        let (k2, n) = dims2("matmul", &self.check(b)?.value)?;
        if k != k2 {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                left: vec![m, k],
                right: vec![k2, n],
            });
        }
        let data = matmul_raw(
            self.nodes[a.index].value.data(),
            self.nodes[b.index].value.data(),
            m,
            k,
            n,
        );
        check_finite("matmul", &data)?;
        let rg = self.grad_of(&[a, b]);
        Ok(self.push(Tensor::from_parts(vec![m, n], data), Op::MatMul(a, b), rg))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let (r, c) = dims2("transpose", &self.check(a)?.value)?;
        let data = transpose_raw(self.nodes[a.index].value.data(), r, c);
        let rg = self.grad_of(&[a]);
        Ok(self.push(Tensor::from_parts(vec![c, r], data), Op::Transpose(a), rg))
    }

    /// Elementwise binary operation. Shapes must match, or one operand must
    /// hold a single element, which is broadcast.
    pub fn binary(&mut self, kind: BinaryKind, a: Var, b: Var) -> Result<Var> {
        let ta = &self.check(a)?.value;
        let tb = &self.check(b)?.value;
        let shape = if ta.shape() == tb.shape()
            || (tb.is_scalar() && !(ta.is_scalar() && tb.shape().len() > ta.shape().len()))
        {
            ta.shape().to_vec()
        } else if ta.is_scalar() {
            tb.shape().to_vec()
        } else {
            return Err(Error::ShapeMismatch {
                op: "ew_binary",
                left: ta.shape().to_vec(),
                right: tb.shape().to_vec(),
            });
        };
        if kind == BinaryKind::Div && tb.data().contains(&0.0) {
            return Err(Error::DivisionByZero { op: "div" });
        }
        let n: usize = shape.iter().product();
        let (da, db) = (ta.data(), tb.data());
        let (sa, sb) = (da.len() == 1 && n != 1, db.len() == 1 && n != 1);
        let data: Vec<f64> = (0..n)
            .map(|i| {
                let x = if sa { da[0] } else { da[i] };
                let y = if sb { db[0] } else { db[i] };
                binary_apply(kind, x, y)
            })
            .collect();
        check_finite("ew_binary", &data)?;
        let rg = self.grad_of(&[a, b]);
        Ok(self.push(Tensor::from_parts(shape, data), Op::Binary(kind, a, b), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryKind::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryKind::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryKind::Mul, a, b)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryKind::Div, a, b)
    }

    /// `a * c` for a plain constant `c`.
    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let s = self.scalar(c);
        self.mul(a, s)
    }

    /// `a + c` for a plain constant `c`.
    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var> {
        let s = self.scalar(c);
        self.add(a, s)
    }

    pub fn unary(&mut self, kind: UnaryKind, a: Var) -> Result<Var> {
        let t = &self.check(a)?.value;
        if kind == UnaryKind::Log {
            if let Some(bad) = t.data().iter().find(|&&v| v <= 0.0) {
                return Err(Error::Domain {
                    op: "log",
                    detail: format!("non-positive element {bad}"),
                });
            }
        }
        let out = t.map(|x| match kind {
            UnaryKind::Sigmoid => sigmoid(x),
            UnaryKind::Tanh => x.tanh(),
            UnaryKind::Exp => x.exp(),
            UnaryKind::Neg => -x,
            UnaryKind::Log => x.ln(),
            UnaryKind::Abs => x.abs(),
            UnaryKind::Square => x * x,
        });
        check_finite("ew_unary", out.data())?;
        let rg = self.grad_of(&[a]);
        Ok(self.push(out, Op::Unary(kind, a), rg))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryKind::Sigmoid, a)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryKind::Tanh, a)
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryKind::Exp, a)
    }

    pub fn neg(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryKind::Neg, a)
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryKind::Log, a)
    }

    pub fn abs(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryKind::Abs, a)
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryKind::Square, a)
    }

    fn row_broadcast(&mut self, kind: BinaryKind, x: Var, row: Var) -> Result<Var> {
        let tx = &self.check(x)?.value;
        let (m, n) = dims2("row_broadcast", tx)?;
        let tr = &self.check(row)?.value;
        if tr.numel() != n || tr.dims2().is_none_or(|(r, _)| r != 1) {
            return Err(Error::ShapeMismatch {
                op: "row_broadcast",
                left: vec![m, n],
                right: tr.shape().to_vec(),
            });
        }
        let r = tr.data();
        let mut data = tx.data().to_vec();
        for chunk in data.chunks_mut(n) {
            for (v, &b) in chunk.iter_mut().zip(r) {
                *v = binary_apply(kind, *v, b);
            }
        }
        check_finite("row_broadcast", &data)?;
        let rg = self.grad_of(&[x, row]);
        Ok(self.push(
            Tensor::from_parts(vec![m, n], data),
            Op::RowBroadcast(kind, x, row),
            rg,
        ))
    }

    /// Adds a length-`n` row vector to every row of an `m×n` matrix.
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var> {
        self.row_broadcast(BinaryKind::Add, x, row)
    }

    /// Multiplies every row of an `m×n` matrix elementwise by a row vector.
    pub fn mul_row(&mut self, x: Var, row: Var) -> Result<Var> {
        self.row_broadcast(BinaryKind::Mul, x, row)
    }

    pub fn reduce(&mut self, kind: ReduceKind, a: Var) -> Result<Var> {
        let t = &self.check(a)?.value;
        let s: f64 = t.data().iter().sum();
        let v = match kind {
            ReduceKind::Sum => s,
            ReduceKind::Mean => {
                if t.numel() == 0 {
                    return Err(Error::EmptyReduction);
                }
                s / t.numel() as f64
            }
        };
        check_finite("reduce", &[v])?;
        let rg = self.grad_of(&[a]);
        Ok(self.push(Tensor::from_parts(vec![], vec![v]), Op::Reduce(kind, a), rg))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.reduce(ReduceKind::Sum, a)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        self.reduce(ReduceKind::Mean, a)
    }

    /// Mean of squared elementwise differences.
    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var> {
        let tp = &self.check(pred)?.value;
        let tt = &self.check(target)?.value;
        if tp.shape() != tt.shape() {
            return Err(Error::ShapeMismatch {
                op: "mse_loss",
                left: tp.shape().to_vec(),
                right: tt.shape().to_vec(),
            });
        }
        if tp.numel() == 0 {
            return Err(Error::EmptyReduction);
        }
        let s: f64 = tp
            .data()
            .iter()
            .zip(tt.data())
            .map(|(p, t)| (p - t) * (p - t))
            .sum();
        let v = s / tp.numel() as f64;
        check_finite("mse_loss", &[v])?;
        let rg = self.grad_of(&[pred, target]);
        Ok(self.push(Tensor::from_parts(vec![], vec![v]), Op::Mse(pred, target), rg))
    }

    /// Columns `start..end` of a matrix.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let t = &self.check(a)?.value;
        let (m, n) = dims2("slice_cols", t)?;
        if start > end || end > n {
            return Err(Error::InvalidShape {
                op: "slice_cols",
                detail: format!("range {start}..{end} out of 0..{n}"),
            });
        }
        let w = end - start;
        let src = t.data();
        let mut data = Vec::with_capacity(m * w);
        for i in 0..m {
            data.extend_from_slice(&src[i * n + start..i * n + end]);
        }
        let rg = self.grad_of(&[a]);
        Ok(self.push(
            Tensor::from_parts(vec![m, w], data),
            Op::SliceCols { src: a, start },
            rg,
        ))
    }

    /// Same data under a new shape with the same element count.
    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let t = &self.check(a)?.value;
        let out = t.clone().reshape(shape.to_vec())?;
        let rg = self.grad_of(&[a]);
        Ok(self.push(out, Op::Reshape(a), rg))
    }

    fn concat(&mut self, axis: Axis, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::InvalidArgument("concat of zero parts".into()));
        }
        let mut dims = Vec::with_capacity(parts.len());
        for &p in parts {
            dims.push(dims2("concat", &self.check(p)?.value)?);
        }
        let (r0, c0) = dims[0];
        let data = match axis {
            Axis::Cols => {
                if let Some(&(r, c)) = dims.iter().find(|(r, _)| *r != r0) {
                    return Err(Error::ShapeMismatch {
                        op: "concat_cols",
                        left: vec![r0, c0],
                        right: vec![r, c],
                    });
                }
                let total: usize = dims.iter().map(|d| d.1).sum();
                let mut data = Vec::with_capacity(r0 * total);
                for i in 0..r0 {
                    for (&p, &(_, c)) in parts.iter().zip(&dims) {
                        data.extend_from_slice(&self.nodes[p.index].value.data()[i * c..(i + 1) * c]);
                    }
                }
                (vec![r0, total], data)
            }
            Axis::Rows => {
                if let Some(&(r, c)) = dims.iter().find(|(_, c)| *c != c0) {
                    return Err(Error::ShapeMismatch {
                        op: "concat_rows",
                        left: vec![r0, c0],
                        right: vec![r, c],
                    });
                }
                let total: usize = dims.iter().map(|d| d.0).sum();
                let mut data = Vec::with_capacity(total * c0);
                for &p in parts {
                    data.extend_from_slice(self.nodes[p.index].value.data());
                }
                (vec![total, c0], data)
            }
        };
        let rg = self.grad_of(parts);
        Ok(self.push(
            Tensor::from_parts(data.0, data.1),
            Op::Concat {
                axis,
                parts: parts.to_vec(),
            },
            rg,
        ))
    }

    /// Joins matrices with equal row counts side by side.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        self.concat(Axis::Cols, parts)
    }

    /// Stacks matrices with equal column counts.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        self.concat(Axis::Rows, parts)
    }

    /// Natural log-determinant of the symmetric part `(A + Aᵀ)/2` of a square
    /// matrix, which must be positive definite.
    pub fn logdet(&mut self, a: Var) -> Result<Var> {
        let t = &self.check(a)?.value;
        let (n, n2) = dims2("logdet", t)?;
        if n != n2 {
            return Err(Error::InvalidShape {
                op: "logdet",
                detail: format!("matrix {n}x{n2} is not square"),
            });
        }
        let d = t.data();
        let sym = DMatrix::from_fn(n, n, |i, j| 0.5 * (d[i * n + j] + d[j * n + i]));
        let chol = sym.cholesky().ok_or_else(|| Error::Domain {
            op: "logdet",
            detail: "matrix is not positive definite".into(),
        })?;
        let l = chol.l_dirty();
        let v: f64 = (0..n).map(|i| 2.0 * l[(i, i)].ln()).sum();
        let inv = chol.inverse();
        let inverse: Vec<f64> = (0..n * n).map(|k| inv[(k / n, k % n)]).collect();
        check_finite("logdet", &[v])?;
        check_finite("logdet", &inverse)?;
        let rg = self.grad_of(&[a]);
        Ok(self.push(
            Tensor::from_parts(vec![], vec![v]),
            Op::LogDet { src: a, inverse },
            rg,
        ))
    }

    /// Reverse pass from a scalar `loss`.
    ///
    /// Every leaf on the tape gets an entry; leaves that do not influence
    /// the loss get exact zeros.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let node = self.check(loss)?;
        if !node.value.is_scalar() {
            return Err(Error::NotScalar(node.value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = Vec::new();
        grads.resize_with(loss.index + 1, || None);
        grads[loss.index] = Some(vec![1.0]);

        for i in (0..=loss.index).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                grads[i] = None;
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads);
        }

        let entries = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| match n.op {
                Op::Leaf => {
                    let data = grads
                        .get_mut(i)
                        .and_then(Option::take)
                        .unwrap_or_else(|| vec![0.0; n.value.numel()]);
                    Some(Tensor::from_parts(n.value.shape().to_vec(), data))
                }
                _ => None,
            })
            .collect();
        Ok(Gradients {
            tape: self.id,
            entries,
        })
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], v: Var, contrib: Vec<f64>) {
        if !self.nodes[v.index].requires_grad {
            return;
        }
        match &mut grads[v.index] {
            Some(acc) => {
                for (a, c) in acc.iter_mut().zip(contrib) {
                    *a += c;
                }
            }
            slot @ None => *slot = Some(contrib),
        }
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let val = |v: Var| &self.nodes[v.index].value;
        let rg = |v: Var| self.nodes[v.index].requires_grad;
        match &node.op {
            Op::Leaf | Op::Constant => {}
            Op::MatMul(a, b) => {
                let (m, k) = val(*a).dims2().unwrap();
                let n = val(*b).dims2().unwrap().1;
                if rg(*a) {
                    let bt = transpose_raw(val(*b).data(), k, n);
                    self.accumulate(grads, *a, matmul_raw(g, &bt, m, n, k));
                }
                if rg(*b) {
                    let at = transpose_raw(val(*a).data(), m, k);
                    self.accumulate(grads, *b, matmul_raw(&at, g, k, m, n));
                }
            }
            Op::Transpose(a) => {
                let (r, c) = val(*a).dims2().unwrap();
                self.accumulate(grads, *a, transpose_raw(g, c, r));
            }
            Op::Binary(kind, a, b) => {
                let (da, db) = (val(*a).data(), val(*b).data());
                let n = g.len();
                let sa = da.len() == 1 && n != 1;
                let sb = db.len() == 1 && n != 1;
                let mut ga = vec![0.0; da.len()];
                let mut gb = vec![0.0; db.len()];
                for i in 0..n {
                    let ia = if sa { 0 } else { i };
                    let ib = if sb { 0 } else { i };
                    let (x, y) = (da[ia], db[ib]);
                    let (dx, dy) = match kind {
                        BinaryKind::Add => (g[i], g[i]),
                        BinaryKind::Sub => (g[i], -g[i]),
                        BinaryKind::Mul => (g[i] * y, g[i] * x),
                        BinaryKind::Div => (g[i] / y, -g[i] * x / (y * y)),
                    };
                    ga[ia] += dx;
                    gb[ib] += dy;
                }
                self.accumulate(grads, *a, ga);
                self.accumulate(grads, *b, gb);
            }
            Op::Unary(kind, a) => {
                let x = val(*a).data();
                let y = node.value.data();
                let out = (0..g.len())
                    .map(|i| {
                        g[i] * match kind {
                            UnaryKind::Sigmoid => y[i] * (1.0 - y[i]),
                            UnaryKind::Tanh => 1.0 - y[i] * y[i],
                            UnaryKind::Exp => y[i],
                            UnaryKind::Neg => -1.0,
                            UnaryKind::Log => 1.0 / x[i],
                            UnaryKind::Abs => {
                                if x[i] > 0.0 {
                                    1.0
                                } else if x[i] < 0.0 {
                                    -1.0
                                } else {
                                    0.0
                                }
                            }
                            UnaryKind::Square => 2.0 * x[i],
                        }
                    })
                    .collect();
                self.accumulate(grads, *a, out);
            }
            Op::RowBroadcast(kind, x, row) => {
                let r = val(*row).data();
                let n = r.len();
                let xd = val(*x).data();
                let mut gr = vec![0.0; n];
                let gx: Vec<f64> = match kind {
                    BinaryKind::Add => {
                        for chunk in g.chunks(n) {
                            for (acc, &v) in gr.iter_mut().zip(chunk) {
                                *acc += v;
                            }
                        }
                        g.to_vec()
                    }
                    BinaryKind::Mul => {
                        for (gc, xc) in g.chunks(n).zip(xd.chunks(n)) {
                            for j in 0..n {
                                gr[j] += gc[j] * xc[j];
                            }
                        }
                        g.iter().enumerate().map(|(i, &v)| v * r[i % n]).collect()
                    }
                    _ => unreachable!("row broadcast supports add and mul"),
                };
                self.accumulate(grads, *x, gx);
                self.accumulate(grads, *row, gr);
            }
            Op::Reduce(kind, a) => {
                let n = val(*a).numel();
                let s = match kind {
                    ReduceKind::Sum => g[0],
                    ReduceKind::Mean => g[0] / n as f64,
                };
                self.accumulate(grads, *a, vec![s; n]);
            }
            Op::Mse(p, t) => {
                let (dp, dt) = (val(*p).data(), val(*t).data());
                let c = 2.0 * g[0] / dp.len() as f64;
                let gp: Vec<f64> = dp.iter().zip(dt).map(|(a, b)| c * (a - b)).collect();
                if rg(*t) {
                    self.accumulate(grads, *t, gp.iter().map(|v| -v).collect());
                }
                self.accumulate(grads, *p, gp);
            }
            Op::SliceCols { src, start } => {
                let (m, n) = val(*src).dims2().unwrap();
                let w = node.value.dims2().unwrap().1;
                let mut out = vec![0.0; m * n];
                for i in 0..m {
                    out[i * n + start..i * n + start + w].copy_from_slice(&g[i * w..(i + 1) * w]);
                }
                self.accumulate(grads, *src, out);
            }
            Op::Reshape(src) => self.accumulate(grads, *src, g.to_vec()),
            Op::Concat { axis, parts } => match axis {
                Axis::Cols => {
                    let total = node.value.dims2().unwrap().1;
                    let mut offset = 0;
                    for &p in parts {
                        let (m, c) = val(p).dims2().unwrap();
                        if rg(p) {
                            let mut out = Vec::with_capacity(m * c);
                            for i in 0..m {
                                out.extend_from_slice(&g[i * total + offset..i * total + offset + c]);
                            }
                            self.accumulate(grads, p, out);
                        }
                        offset += c;
                    }
                }
                Axis::Rows => {
                    let mut offset = 0;
                    for &p in parts {
                        let len = val(p).numel();
                        if rg(p) {
                            self.accumulate(grads, p, g[offset..offset + len].to_vec());
                        }
                        offset += len;
                    }
                }
            },
            Op::LogDet { src, inverse } => {
                self.accumulate(grads, *src, inverse.iter().map(|v| v * g[0]).collect());
            }
        }
    }
}

/// Leaf gradients produced by [`Tape::backward`], keyed by node id.
#[derive(Debug, Clone)]
pub struct Gradients {
    tape: u64,
    entries: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the loss with respect to leaf `v`.
    ///
    /// # Panics
    /// If `v` is not a leaf of the tape these gradients came from.
    pub fn get(&self, v: Var) -> &Tensor {
        assert_eq!(v.tape, self.tape, "var from another tape");
        self.entries[v.index].as_ref().expect("gradient requested for a non-leaf")
    }

    pub fn try_get(&self, v: Var) -> Option<&Tensor> {
        if v.tape != self.tape {
            return None;
        }
        self.entries.get(v.index).and_then(Option::as_ref)
    }
}
