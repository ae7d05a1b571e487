//! History/horizon windows over featurized CSI.

use std::ops::Range;

use num_complex::Complex64;

use crate::channel::CsiTensor;
use crate::error::{Error, Result};

pub const HISTORY_LEN: usize = 20;
pub const HORIZON_LEN: usize = 5;

/// Complex coefficients as interleaved `re, im` columns.
pub fn featurize(coeffs: &[Complex64]) -> Vec<f64> {
    coeffs.iter().flat_map(|c| [c.re, c.im]).collect()
}

pub fn defeaturize(row: &[f64]) -> Result<Vec<Complex64>> {
    if !row.len().is_multiple_of(2) {
        return Err(Error::Invalid(format!("odd feature count {}", row.len())));
    }
    Ok(row.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect())
}

/// Sliding windows (stride 1) over a contiguous time range of a CSI
/// sequence. Rows are featurized but not standardized.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowedDataset {
    pub l_h: usize,
    pub l_p: usize,
    /// Time index of `rows[0]` in the source sequence.
    pub offset: usize,
    rows: Vec<Vec<f64>>,
}

impl WindowedDataset {
    pub fn from_rows(rows: Vec<Vec<f64>>, offset: usize, l_h: usize, l_p: usize) -> Result<Self> {
        if l_h == 0 || l_p == 0 {
            return Err(Error::Invalid("history and horizon must be >= 1".into()));
        }
        if rows.len() < l_h + l_p {
            return Err(Error::Invalid(format!(
                "sequence of {} steps is shorter than L_h + L_p = {}",
                rows.len(),
                l_h + l_p
            )));
        }
        let f = rows[0].len();
        if f == 0 || rows.iter().any(|r| r.len() != f) {
            return Err(Error::Invalid("rows must share a nonzero width".into()));
        }
        Ok(Self { l_h, l_p, offset, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len() + 1 - self.l_h - self.l_p
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_features(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn history(&self, i: usize) -> &[Vec<f64>] {
        &self.rows[i..i + self.l_h]
    }

    pub fn targets(&self, i: usize) -> &[Vec<f64>] {
        &self.rows[i + self.l_h..i + self.l_h + self.l_p]
    }

    /// Source time indices touched by window `i`.
    pub fn time_span(&self, i: usize) -> Range<usize> {
        self.offset + i..self.offset + i + self.l_h + self.l_p
    }

    /// Source time indices touched by any window.
    pub fn time_range(&self) -> Range<usize> {
        self.offset..self.offset + self.rows.len()
    }
}

/// All windows of `csi[range]`; every step's coefficients form one row.
pub fn make_windows_in(csi: &CsiTensor, range: Range<usize>, l_h: usize, l_p: usize) -> Result<WindowedDataset> {
    if range.end > csi.n_time() || range.start > range.end {
        return Err(Error::Invalid(format!("time range {range:?} outside 0..{}", csi.n_time())));
    }
    let rows = range.clone().map(|t| featurize(csi.step(t))).collect();
    WindowedDataset::from_rows(rows, range.start, l_h, l_p)
}

pub fn make_windows(csi: &CsiTensor, l_h: usize, l_p: usize) -> Result<WindowedDataset> {
    make_windows_in(csi, 0..csi.n_time(), l_h, l_p)
}

/// Splits the sequence in time: windows of the first `train_frac` of steps
/// and windows of the rest. The two never share a time index.
pub fn split_windows(
    csi: &CsiTensor,
    l_h: usize,
    l_p: usize,
    train_frac: f64,
) -> Result<(WindowedDataset, WindowedDataset)> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::Invalid(format!("train fraction {train_frac} outside (0, 1)")));
    }
    let t = csi.n_time();
    let cut = (t as f64 * train_frac).round() as usize;
    let train = make_windows_in(csi, 0..cut, l_h, l_p)?;
    let test = make_windows_in(csi, cut..t, l_h, l_p)?;
    debug_assert!(train.time_range().end <= test.time_range().start);
    Ok((train, test))
}

/// Per-column affine standardization fitted on training rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n < 2 {
            return Err(Error::Invalid("standardizer needs at least two rows".into()));
        }
        let f = rows[0].len();
        let mut mean = vec![0.0; f];
        for r in rows {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; f];
        for r in rows {
            for ((v, x), m) in var.iter_mut().zip(r).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let std = var
            .iter()
            .map(|v| {
                let s = (v / n as f64).sqrt();
                if s > 1e-12 { s } else { 1.0 }
            })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn identity(n_features: usize) -> Self {
        Self { mean: vec![0.0; n_features], std: vec![1.0; n_features] }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(&self.mean).zip(&self.std).map(|((x, m), s)| (x - m) / s).collect()
    }

    pub fn invert(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(&self.mean).zip(&self.std).map(|((z, m), s)| z * s + m).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::PredictionScenario;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ramp(t: usize) -> CsiTensor {
        let data = (0..t * 4).map(|i| Complex64::new(i as f64, -(i as f64))).collect();
        CsiTensor::from_data([t, 1, 1, 4], data).unwrap()
    }

    #[test]
    fn window_count_and_slicing() {
        let ds = make_windows(&ramp(100), 20, 5).unwrap();
        assert_eq!(ds.len(), 76);
        assert_eq!(ds.n_features(), 8);
        let csi = ramp(100);
        for (k, row) in ds.history(0).iter().enumerate() {
            assert_eq!(row, &featurize(csi.step(k)));
        }
        for (k, row) in ds.targets(0).iter().enumerate() {
            assert_eq!(row, &featurize(csi.step(20 + k)));
        }
        assert_eq!(ds.history(75).len(), 20);
        assert_eq!(ds.targets(75).last().unwrap(), &featurize(csi.step(99)));
        assert!(make_windows(&ramp(24), 20, 5).is_err());
        assert_eq!(make_windows(&ramp(25), 20, 5).unwrap().len(), 1);
    }

    #[test]
    fn four_antennas_give_eight_features() {
        let csi = PredictionScenario { n_steps: 40, ..Default::default() }.generate().unwrap();
        assert_eq!(make_windows(&csi, 20, 5).unwrap().n_features(), 8);
    }

    #[test]
    fn split_never_shares_time_indices() {
        let (train, test) = split_windows(&ramp(1000), 20, 5, 0.8).unwrap();
        assert_eq!(train.time_range(), 0..800);
        assert_eq!(test.time_range(), 800..1000);
        let last_train = train.time_span(train.len() - 1);
        let first_test = test.time_span(0);
        assert!(last_train.end <= first_test.start);
        assert_eq!(train.len() + test.len(), 1000 - 2 * 24);
        assert!(split_windows(&ramp(1000), 20, 5, 1.0).is_err());
    }

    #[test]
    fn featurize_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<Vec<f64>> =
            (0..500).map(|_| (0..8).map(|j| rng.random_range(-3.0..3.0) * (j + 1) as f64 + j as f64).collect()).collect();
        let st = Standardizer::fit(&rows).unwrap();
        for r in &rows {
            let back = st.invert(&st.apply(r));
            assert!(r.iter().zip(&back).all(|(a, b)| (a - b).abs() < 1e-12));
            let c = defeaturize(r).unwrap();
            assert_eq!(&featurize(&c), r);
        }
        assert!(defeaturize(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn standardized_train_columns_are_unit() {
        let csi = PredictionScenario { n_steps: 3000, ..Default::default() }.generate().unwrap();
        let (train, _) = split_windows(&csi, 20, 5, 0.8).unwrap();
        let st = Standardizer::fit(train.rows()).unwrap();
        let z: Vec<Vec<f64>> = train.rows().iter().map(|r| st.apply(r)).collect();
        for j in 0..8 {
            let n = z.len() as f64;
            let m = z.iter().map(|r| r[j]).sum::<f64>() / n;
            let v = z.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n;
            assert!(m.abs() < 1e-9, "col {j} mean {m}");
            assert!((v - 1.0).abs() < 1e-6, "col {j} var {v}");
        }
    }
}
