//! Non-learned predictors: last-value hold and least-squares AR.

use nalgebra::{DMatrix, DVector};

use super::dataset::WindowedDataset;
use super::Forecaster;
use crate::error::{Error, Result};

/// Repeats the last observed row for every horizon.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NaiveHold;

impl Forecaster for NaiveHold {
    fn name(&self) -> String {
        "naive_hold".into()
    }

    fn forecast(&self, ds: &WindowedDataset, idx: &[usize]) -> Result<Vec<Vec<Vec<f64>>>> {
        Ok(idx
            .iter()
            .map(|&i| vec![ds.history(i).last().unwrap().clone(); ds.l_p])
            .collect())
    }
}

pub const RIDGE: f64 = 1e-6;

/// `x[t] = Σ_i a_i x[t−i]`, one coefficient vector shared by all feature
/// columns, fitted by least squares on a training sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct ArLs {
    /// `coef[i]` multiplies lag `i + 1`.
    pub coef: Vec<f64>,
    /// The normal equations were singular and `RIDGE` was added.
    pub ridge_used: bool,
}

impl ArLs {
    pub fn fit(rows: &[Vec<f64>], order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::Invalid("AR order must be >= 1".into()));
        }
        if rows.len() <= order {
            return Err(Error::Invalid(format!("{} rows cannot fit AR({order})", rows.len())));
        }
        let f = rows[0].len();
        let mut ata = DMatrix::<f64>::zeros(order, order);
        let mut atb = DVector::<f64>::zeros(order);
        for t in order..rows.len() {
            for j in 0..f {
                let lags: Vec<f64> = (1..=order).map(|i| rows[t - i][j]).collect();
                for a in 0..order {
                    atb[a] += lags[a] * rows[t][j];
                    for b in 0..order {
                        ata[(a, b)] += lags[a] * lags[b];
                    }
                }
            }
        }
        let scale = ata.diagonal().max().max(f64::MIN_POSITIVE);
        let solved = ata.clone().cholesky().filter(|c| {
            // reject numerically singular systems
            let d = c.l().diagonal();
            d.min() * d.min() > 1e-13 * scale
        });
        let (coef, ridge_used) = match solved {
            Some(c) => (c.solve(&atb), false),
            None => {
                let reg = &ata + DMatrix::identity(order, order) * RIDGE;
                let c = reg
                    .cholesky()
                    .ok_or_else(|| Error::Numerical("AR normal equations not positive definite".into()))?;
                (c.solve(&atb), true)
            }
        };
        Ok(Self { coef: coef.iter().copied().collect(), ridge_used })
    }

    pub fn order(&self) -> usize {
        self.coef.len()
    }
}

impl Forecaster for ArLs {
    fn name(&self) -> String {
        "ar_ls".into()
    }

    fn forecast(&self, ds: &WindowedDataset, idx: &[usize]) -> Result<Vec<Vec<Vec<f64>>>> {
        let p = self.order();
        if ds.l_h < p {
            return Err(Error::Invalid(format!("history {} shorter than AR order {p}", ds.l_h)));
        }
        Ok(idx
            .iter()
            .map(|&i| {
                let mut buf: Vec<Vec<f64>> = ds.history(i).to_vec();
                for _ in 0..ds.l_p {
                    let n = buf.len();
                    let next = (0..ds.n_features())
                        .map(|j| (0..p).map(|k| self.coef[k] * buf[n - 1 - k][j]).sum())
                        .collect();
                    buf.push(next);
                }
                buf.split_off(ds.l_h)
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hold_on_constant_channel_is_exact() {
        let ds = WindowedDataset::from_rows(vec![vec![0.3, -1.2]; 40], 0, 20, 5).unwrap();
        let out = NaiveHold.forecast(&ds, &[0, 10]).unwrap();
        assert!(out.iter().flatten().all(|r| r == &vec![0.3, -1.2]));
    }

    #[test]
    fn recovers_ar1_coefficient() {
        let rows: Vec<Vec<f64>> = (0..200).map(|t| vec![0.9f64.powi(t), -2.0 * 0.9f64.powi(t)]).collect();
        let ar = ArLs::fit(&rows, 1).unwrap();
        assert!((ar.coef[0] - 0.9).abs() < 1e-6, "{:?}", ar.coef);
        assert!(!ar.ridge_used);
    }

    #[test]
    fn singular_system_falls_back_to_ridge() {
        // constant rows make every lag column identical
        let rows = vec![vec![1.0]; 50];
        let ar = ArLs::fit(&rows, 3).unwrap();
        assert!(ar.ridge_used);
        let s: f64 = ar.coef.iter().sum();
        assert!((s - 1.0).abs() < 1e-6, "{:?}", ar.coef);
    }

    #[test]
    fn ar_rollout_continues_a_sinusoid() {
        // a pure sinusoid obeys x[t] = 2cos(w) x[t-1] - x[t-2]
        let w = 0.3f64;
        let rows: Vec<Vec<f64>> = (0..300).map(|t| vec![(w * t as f64).sin()]).collect();
        let ar = ArLs::fit(&rows, 2).unwrap();
        assert!((ar.coef[0] - 2.0 * w.cos()).abs() < 1e-8);
        assert!((ar.coef[1] + 1.0).abs() < 1e-8);
        let ds = WindowedDataset::from_rows(rows.clone(), 0, 20, 5).unwrap();
        let out = ar.forecast(&ds, &[7]).unwrap();
        for (k, r) in out[0].iter().enumerate() {
            assert!((r[0] - rows[27 + k][0]).abs() < 1e-6);
        }
    }

    #[test]
    fn bad_orders() {
        assert!(ArLs::fit(&vec![vec![1.0]; 3], 0).is_err());
        assert!(ArLs::fit(&vec![vec![1.0]; 3], 3).is_err());
    }
}
