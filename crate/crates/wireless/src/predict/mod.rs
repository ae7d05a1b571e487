//! Multi-step CSI prediction: windowing, predictors, per-horizon MSE.

mod baseline;
mod dataset;
mod model;

use std::io::Write;

use rayon::prelude::*;

pub use baseline::{ArLs, NaiveHold, RIDGE};
pub use dataset::{
    defeaturize, featurize, make_windows, make_windows_in, split_windows, Standardizer, WindowedDataset,
    HISTORY_LEN, HORIZON_LEN,
};
pub use model::{
    train_predictor, EpochLog, NeuralPredictor, TrainConfig, Trained, DEFAULT_DT, DEFAULT_UNFOLDS, DEFAULT_UNITS,
};

use crate::error::{Error, Result};

/// Anything that maps history windows to `l_p` future rows.
pub trait Forecaster: Sync {
    fn name(&self) -> String;

    /// Predictions for windows `idx` of `ds`, physical scale, indexed
    /// `[window][horizon][feature]`.
    fn forecast(&self, ds: &WindowedDataset, idx: &[usize]) -> Result<Vec<Vec<Vec<f64>>>>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub scheme: String,
    /// `mse[k]` is horizon `k + 1`.
    pub mse: Vec<f64>,
    pub seed: u64,
    pub scenario_hash: String,
}

const EVAL_CHUNK: usize = 256;

/// Per-horizon MSE over all windows of `ds`: mean over windows and complex
/// coefficients of `|ĥ − h|²`.
pub fn evaluate_mse(model: &dyn Forecaster, ds: &WindowedDataset, seed: u64, scenario_hash: &str) -> Result<EvalReport> {
    if ds.is_empty() {
        return Err(Error::Invalid("cannot evaluate on an empty dataset".into()));
    }
    let idx: Vec<usize> = (0..ds.len()).collect();
    let sums = idx
        .par_chunks(EVAL_CHUNK)
        .map(|chunk| {
            let pred = model.forecast(ds, chunk)?;
            let mut s = vec![0.0; ds.l_p];
            for (&i, p) in chunk.iter().zip(&pred) {
                for (k, (row, target)) in p.iter().zip(ds.targets(i)).enumerate() {
                    s[k] += row.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                }
            }
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    let n_coeff = (ds.n_features() / 2).max(1) as f64;
    let denom = ds.len() as f64 * n_coeff;
    let mut mse = vec![0.0; ds.l_p];
    for s in &sums {
        for (m, v) in mse.iter_mut().zip(s) {
            *m += v;
        }
    }
    mse.iter_mut().for_each(|m| *m /= denom);
    Ok(EvalReport { scheme: model.name(), mse, seed, scenario_hash: scenario_hash.to_string() })
}

/// Columns `scheme, horizon, mse, seed, scenario_hash`; horizons from 1.
pub fn write_eval_csv(reports: &[EvalReport], mut w: impl Write) -> Result<()> {
    writeln!(w, "scheme,horizon,mse,seed,scenario_hash")?;
    for r in reports {
        for (k, m) in r.mse.iter().enumerate() {
            writeln!(w, "{},{},{m},{},{}", r.scheme, k + 1, r.seed, r.scenario_hash)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{bessel_j0, PredictionScenario};

    struct Oracle;

    impl Forecaster for Oracle {
        fn name(&self) -> String {
            "oracle".into()
        }

        fn forecast(&self, ds: &WindowedDataset, idx: &[usize]) -> Result<Vec<Vec<Vec<f64>>>> {
            Ok(idx.iter().map(|&i| ds.targets(i).to_vec()).collect())
        }
    }

    #[test]
    fn oracle_scores_zero() {
        let csi = PredictionScenario { n_steps: 600, ..Default::default() }.generate().unwrap();
        let ds = make_windows(&csi, HISTORY_LEN, HORIZON_LEN).unwrap();
        let r = evaluate_mse(&Oracle, &ds, 0, "x").unwrap();
        assert_eq!(r.mse, vec![0.0; 5]);
        assert_eq!(r.scheme, "oracle");
    }

    #[test]
    fn naive_hold_matches_autocorrelation() {
        let sc = PredictionScenario::default();
        let ds = make_windows(&sc.generate().unwrap(), HISTORY_LEN, HORIZON_LEN).unwrap();
        let r = evaluate_mse(&NaiveHold, &ds, sc.seed, "x").unwrap();
        assert_eq!(r.mse.len(), 5);
        for (k, m) in r.mse.iter().enumerate() {
            let x = 2.0 * std::f64::consts::PI * sc.doppler_hz().unwrap() * (k + 1) as f64 * sc.sample_interval_s;
            let want = 2.0 * (1.0 - bessel_j0(x));
            assert!((m - want).abs() / want < 0.05, "k={} mse {m} want {want}", k + 1);
        }
    }

    #[test]
    fn evaluation_is_deterministic_and_csv_stable() {
        let csi = PredictionScenario { n_steps: 2000, ..Default::default() }.generate().unwrap();
        let ds = make_windows(&csi, 20, 5).unwrap();
        let a = evaluate_mse(&NaiveHold, &ds, 3, "abc").unwrap();
        let b = evaluate_mse(&NaiveHold, &ds, 3, "abc").unwrap();
        assert_eq!(a, b);
        let mut buf = Vec::new();
        write_eval_csv(&[a], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "scheme,horizon,mse,seed,scenario_hash");
        assert_eq!(lines.len(), 6);
        assert!(lines[1].starts_with("naive_hold,1,"));
        assert!(lines[5].ends_with(",3,abc"));
    }
}
