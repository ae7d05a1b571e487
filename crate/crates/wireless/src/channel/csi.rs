//! Time-indexed complex channel coefficients and the `LNNCSI1` file format.
//!
//! File layout, little-endian: the 7 magic bytes `LNNCSI1`, a `u32` rank
//! (always 4), the extents `time, users, rx, tx` as `u64`, then every
//! coefficient as an interleaved `(re, im)` pair of `f64` in row-major order.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const CSI_MAGIC: &[u8; 7] = b"LNNCSI1";

#[derive(Clone, Debug, PartialEq)]
pub struct CsiTensor {
    n_time: usize,
    n_users: usize,
    n_rx: usize,
    n_tx: usize,
    data: Vec<Complex64>,
}

impl CsiTensor {
    pub fn zeros(n_time: usize, n_users: usize, n_rx: usize, n_tx: usize) -> Self {
        Self {
            n_time,
            n_users,
            n_rx,
            n_tx,
            data: vec![Complex64::new(0.0, 0.0); n_time * n_users * n_rx * n_tx],
        }
    }

    pub fn from_data(shape: [usize; 4], data: Vec<Complex64>) -> Result<Self> {
        let [n_time, n_users, n_rx, n_tx] = shape;
        if data.len() != n_time * n_users * n_rx * n_tx {
            return Err(Error::Invalid(format!(
                "csi: {} coefficients do not fill shape {shape:?}",
                data.len()
            )));
        }
        if data.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Invalid("csi: non-finite coefficient".into()));
        }
        Ok(Self {
            n_time,
            n_users,
            n_rx,
            n_tx,
            data,
        })
    }

    /// `[time, users, rx, tx]`
    pub fn shape(&self) -> [usize; 4] {
        [self.n_time, self.n_users, self.n_rx, self.n_tx]
    }

    pub fn n_time(&self) -> usize {
        self.n_time
    }

    /// Coefficients per time step.
    pub fn coefficients_per_step(&self) -> usize {
        self.n_users * self.n_rx * self.n_tx
    }

    fn index(&self, t: usize, user: usize, rx: usize, tx: usize) -> usize {
        debug_assert!(t < self.n_time && user < self.n_users && rx < self.n_rx && tx < self.n_tx);
        ((t * self.n_users + user) * self.n_rx + rx) * self.n_tx + tx
    }

    pub fn get(&self, t: usize, user: usize, rx: usize, tx: usize) -> Complex64 {
        self.data[self.index(t, user, rx, tx)]
    }

    pub fn set(&mut self, t: usize, user: usize, rx: usize, tx: usize, v: Complex64) {
        let i = self.index(t, user, rx, tx);
        self.data[i] = v;
    }

    /// All coefficients of step `t`, row-major over `(user, rx, tx)`.
    pub fn step(&self, t: usize) -> &[Complex64] {
        let n = self.coefficients_per_step();
        &self.data[t * n..(t + 1) * n]
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    /// Mean `|h|²` over every coefficient.
    pub fn mean_power(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum::<f64>() / self.data.len().max(1) as f64
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(CSI_MAGIC)?;
        w.write_all(&4u32.to_le_bytes())?;
        for d in self.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.data.len() * 16);
        for c in &self.data {
            buf.extend_from_slice(&c.re.to_le_bytes());
            buf.extend_from_slice(&c.im.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 7];
        r.read_exact(&mut magic)?;
        if &magic != CSI_MAGIC {
            return Err(Error::Format("not an LNNCSI1 file".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let rank = u32::from_le_bytes(b4);
        if rank != 4 {
            return Err(Error::Format(format!("expected rank 4, found {rank}")));
        }
        let mut shape = [0usize; 4];
        for s in &mut shape {
            let mut b8 = [0u8; 8];
            r.read_exact(&mut b8)?;
            *s = usize::try_from(u64::from_le_bytes(b8)).map_err(|_| Error::Format("extent overflow".into()))?;
        }
        let n = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .filter(|&n| n <= 1 << 30)
            .ok_or_else(|| Error::Format("dataset too large".into()))?;
        let mut bytes = vec![0u8; n * 16];
        r.read_exact(&mut bytes)?;
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(Error::Format(format!("{} trailing bytes", rest.len())));
        }
        let data = bytes
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[..8].try_into().expect("8 bytes")),
                    f64::from_le_bytes(c[8..].try_into().expect("8 bytes")),
                )
            })
            .collect();
        Self::from_data(shape, data).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_round_trip() {
        let data: Vec<Complex64> = (0..24).map(|i| Complex64::new(i as f64 / 7.0, -(i as f64).sqrt())).collect();
        let csi = CsiTensor::from_data([3, 2, 1, 4], data).unwrap();
        let mut buf = Vec::new();
        csi.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..7], b"LNNCSI1");
        assert_eq!(buf.len(), 7 + 4 + 32 + 24 * 16);
        let back = CsiTensor::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back, csi);
        assert_eq!(back.get(2, 1, 0, 3), Complex64::new(23.0 / 7.0, -(23f64).sqrt()));

        buf[0] = b'X';
        assert!(CsiTensor::read_from(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn shape_must_match_data() {
        assert!(CsiTensor::from_data([2, 1, 1, 2], vec![Complex64::new(0.0, 0.0); 3]).is_err());
    }
}
