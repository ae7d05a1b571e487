//! `LNNCKPT1` checkpoints: a cell, its wiring when it has one, and any
//! extra named tensors a task wants to keep next to it.
//!
//! Layout, all integers and reals little-endian:
//!
//! ```text
//! "LNNCKPT1"
//! u32 len, kind tag ("ltc" | "cfc" | "gru")
//! u8 solver (0 fused, 1 rk4), u64 unfolds
//! u64 n_inputs, u64 n_units, u64 n_outputs, u64 readout_from
//! u8 has_wiring [, 4 × u64 layer sizes, n² × i8 adjacency]
//! u8 has_mask [, tensor input, tensor recurrent]
//! u64 n_params, n_params × named tensor
//! u64 n_extra, n_extra × named tensor
//! named tensor = u32 len, name, tensor
//! tensor = u32 ndim, ndim × u64 extent, numel × f64
//! ```

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Parameters, Tensor};
use crate::cells::{Cell, CellKind, LtcSolver, Readout, SparsityMask};
use crate::error::{Error, Result};
use crate::wiring::Wiring;

pub const MAGIC: &[u8; 8] = b"LNNCKPT1";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub cell: Cell,
    pub wiring: Option<Wiring>,
    pub extra: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn new(cell: Cell) -> Self {
        Self {
            cell,
            wiring: None,
            extra: Vec::new(),
        }
    }

    pub fn extra(&self, name: &str) -> Option<&Tensor> {
        self.extra.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        write_str(w, self.cell.kind().as_str())?;
        let (solver, unfolds) = match &self.cell {
            Cell::Ltc(c) => match c.solver {
                LtcSolver::Fused { unfolds } => (0u8, unfolds),
                LtcSolver::Rk4 { unfolds } => (1, unfolds),
            },
            _ => (0, 0),
        };
        w.write_all(&[solver])?;
        write_u64(w, unfolds as u64)?;
        for v in [
            self.cell.n_inputs(),
            self.cell.n_units(),
            self.cell.n_outputs(),
            self.cell.readout().from,
        ] {
            write_u64(w, v as u64)?;
        }
        match &self.wiring {
            Some(wr) => {
                w.write_all(&[1])?;
                for s in wr.sizes() {
                    write_u64(w, s as u64)?;
                }
                let bytes: Vec<u8> = wr.adjacency().iter().map(|&v| v as u8).collect();
                w.write_all(&bytes)?;
            }
            None => w.write_all(&[0])?,
        }
        match self.cell.mask() {
            Some(m) => {
                w.write_all(&[1])?;
                write_tensor(w, &m.input)?;
                write_tensor(w, &m.recurrent)?;
            }
            None => w.write_all(&[0])?,
        }
        let params = self.cell.named_params();
        write_u64(w, params.len() as u64)?;
        for (name, t) in params {
            write_str(w, &name)?;
            write_tensor(w, t)?;
        }
        write_u64(w, self.extra.len() as u64)?;
        for (name, t) in &self.extra {
            write_str(w, name)?;
            write_tensor(w, t)?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let kind: CellKind = read_str(r)?.parse()?;
        let solver = read_u8(r)?;
        let unfolds = read_usize(r)?;
        let n_inputs = read_usize(r)?;
        let n_units = read_usize(r)?;
        let n_outputs = read_usize(r)?;
        let from = read_usize(r)?;
        if from >= n_units {
            return Err(Error::Checkpoint(format!("readout offset {from} out of range")));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut cell = Cell::new(kind, &mut rng, n_inputs, n_units, n_outputs);
        *cell.readout_mut() = Readout::init(&mut rng, n_units, from, n_outputs);
        if let Cell::Ltc(c) = &mut cell {
            c.solver = match solver {
                0 => LtcSolver::Fused { unfolds },
                1 => LtcSolver::Rk4 { unfolds },
                s => return Err(Error::Checkpoint(format!("unknown solver tag {s}"))),
            };
        }

        let wiring = match read_u8(r)? {
            0 => None,
            1 => {
                let mut sizes = [0usize; 4];
                for s in &mut sizes {
                    *s = read_usize(r)?;
                }
                let n: usize = sizes.iter().sum();
                let mut bytes = vec![0u8; n * n];
                r.read_exact(&mut bytes)?;
                let adj = bytes.into_iter().map(|b| b as i8).collect();
                Some(Wiring::from_parts(sizes, adj).map_err(|e| Error::Checkpoint(e.to_string()))?)
            }
            f => return Err(Error::Checkpoint(format!("bad wiring flag {f}"))),
        };

        let mask = match read_u8(r)? {
            0 => None,
            1 => Some(SparsityMask {
                input: read_tensor(r)?,
                recurrent: read_tensor(r)?,
            }),
            f => return Err(Error::Checkpoint(format!("bad mask flag {f}"))),
        };
        match (&mut cell, mask) {
            (_, None) => {}
            (Cell::Ltc(c), Some(m)) => c.mask = Some(m),
            (Cell::Cfc(c), Some(m)) => c.mask = Some(m),
            (Cell::Gru(_), Some(_)) => return Err(Error::Checkpoint("GRU checkpoint carries a mask".into())),
        }

        let n_params = read_usize(r)?;
        let names: Vec<(String, Vec<usize>)> = cell
            .named_params()
            .into_iter()
            .map(|(n, t)| (n, t.shape().to_vec()))
            .collect();
        if n_params != names.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameter tensors, found {n_params}",
                names.len()
            )));
        }
        for ((want, shape), slot) in names.iter().zip(cell.params_mut()) {
            let name = read_str(r)?;
            let t = read_tensor(r)?;
            if &name != want || t.shape() != shape.as_slice() {
                return Err(Error::Checkpoint(format!(
                    "parameter {name} {:?} does not match expected {want} {shape:?}",
                    t.shape()
                )));
            }
            *slot = t;
        }

        let n_extra = read_usize(r)?;
        let mut extra = Vec::with_capacity(n_extra.min(1024));
        for _ in 0..n_extra {
            let name = read_str(r)?;
            extra.push((name, read_tensor(r)?));
        }
        Ok(Self { cell, wiring, extra })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory cannot fail");
        buf
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self> {
        let ck = Self::read_from(&mut bytes)?;
        if !bytes.is_empty() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len())));
        }
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn write_u64(w: &mut impl Write, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_str(w: &mut impl Write, s: &str) -> Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn write_tensor(w: &mut impl Write, t: &Tensor) -> Result<()> {
    w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
    for &d in t.shape() {
        write_u64(w, d as u64)?;
    }
    for v in t.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u8(r: &mut impl Read) -> Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_usize(r: &mut impl Read) -> Result<usize> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    usize::try_from(u64::from_le_bytes(b)).map_err(|_| Error::Checkpoint("integer overflow".into()))
}

fn read_str(r: &mut impl Read) -> Result<String> {
    let n = read_u32(r)? as usize;
    if n > 4096 {
        return Err(Error::Checkpoint(format!("name length {n} too large")));
    }
    let mut b = vec![0u8; n];
    r.read_exact(&mut b)?;
    String::from_utf8(b).map_err(|_| Error::Checkpoint("name is not UTF-8".into()))
}

fn read_tensor(r: &mut impl Read) -> Result<Tensor> {
    let nd = read_u32(r)? as usize;
    if nd > 8 {
        return Err(Error::Checkpoint(format!("tensor rank {nd} too large")));
    }
    let shape = (0..nd).map(|_| read_usize(r)).collect::<Result<Vec<_>>>()?;
    let n = shape
        .iter()
        .try_fold(1usize, |a, &d| a.checked_mul(d))
        .filter(|&n| n <= 1 << 28)
        .ok_or_else(|| Error::Checkpoint("tensor too large".into()))?;
    let mut bytes = vec![0u8; n * 8];
    r.read_exact(&mut bytes)?;
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Tensor::new(shape, data).map_err(|e| Error::Checkpoint(e.to_string()))
}
