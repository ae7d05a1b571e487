//! The three-phase online beamforming run and its SE trace.

use std::io::Write;

use super::glnn::{Glnn, GlnnConfig};
use super::reference::{mrt, zf};
use super::se::{sum_se, PrecoderSet};
use super::wmmse::{wmmse_solve, WmmseConfig};
use crate::channel::{beamforming_channel_sequence, BeamformingScenario, ChannelSet};
use crate::error::{Error, Result};

pub const SCHEMES: [&str; 4] = ["glnn", "wmmse", "mrt", "zf"];

#[derive(Clone, Debug, PartialEq)]
pub struct BfConfig {
    pub glnn: GlnnConfig,
    pub wmmse: WmmseConfig,
    /// Start WMMSE from the previous step's solution instead of MRT.
    pub wmmse_warm_start: bool,
}

impl Default for BfConfig {
    fn default() -> Self {
        Self {
            glnn: GlnnConfig::default(),
            wmmse: WmmseConfig::default(),
            wmmse_warm_start: true,
        }
    }
}

/// Per-step sum SE of every scheme.
#[derive(Clone, Debug, PartialEq)]
pub struct SeTrace {
    pub seed: u64,
    /// Phase index of every step, starting at 0.
    pub phase: Vec<usize>,
    pub boundaries: Vec<usize>,
    pub schemes: Vec<(String, Vec<f64>)>,
}

impl SeTrace {
    pub fn len(&self) -> usize {
        self.phase.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phase.is_empty()
    }

    pub fn scheme(&self, name: &str) -> Option<&[f64]> {
        self.schemes.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    /// Mean SE of `name` over steps `range`.
    pub fn mean(&self, name: &str, range: std::ops::Range<usize>) -> Option<f64> {
        let s = self.scheme(name)?.get(range)?;
        if s.is_empty() {
            return None;
        }
        Some(s.iter().sum::<f64>() / s.len() as f64)
    }

    /// Columns `step, phase, scheme, se_bits_per_s_hz, seed`, grouped by
    /// scheme. Phases are numbered from 1.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "step,phase,scheme,se_bits_per_s_hz,seed")?;
        for (name, se) in &self.schemes {
            for (t, v) in se.iter().enumerate() {
                writeln!(w, "{t},{},{name},{v},{}", self.phase[t] + 1, self.seed)?;
            }
        }
        Ok(())
    }

    /// Columns `scheme, phase, mean_se_bits_per_s_hz, seed`; phase `all`
    /// covers the whole run.
    pub fn write_summary_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "scheme,phase,mean_se_bits_per_s_hz,seed")?;
        let n_phases = self.boundaries.len() + 1;
        for (name, se) in &self.schemes {
            for p in 0..n_phases {
                let vals: Vec<f64> = se.iter().zip(&self.phase).filter(|(_, &q)| q == p).map(|(v, _)| *v).collect();
                let mean = vals.iter().sum::<f64>() / vals.len().max(1) as f64;
                writeln!(w, "{name},{},{mean},{}", p + 1, self.seed)?;
            }
            let mean = se.iter().sum::<f64>() / se.len().max(1) as f64;
            writeln!(w, "{name},all,{mean},{}", self.seed)?;
        }
        Ok(())
    }
}

/// Comparison of GLNN against WMMSE over the end of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct BfReport {
    pub window: usize,
    pub glnn_final_mean: f64,
    pub wmmse_final_mean: f64,
    pub mrt_final_mean: f64,
    pub zf_final_mean: f64,
    /// `glnn_final_mean / wmmse_final_mean`
    pub ratio: f64,
    /// First step after `warmup` from which GLNN's trailing `window`-step
    /// mean stays at or above WMMSE's until the end, if any.
    pub surpasses_wmmse_from: Option<usize>,
}

impl BfReport {
    pub fn from_trace(trace: &SeTrace, window: usize, warmup: usize) -> Result<Self> {
        let n = trace.len();
        if window == 0 || window > n {
            return Err(Error::Invalid(format!("report window {window} outside 1..={n}")));
        }
        let tail = n - window..n;
        let mean = |s: &str| {
            trace
                .mean(s, tail.clone())
                .ok_or_else(|| Error::Invalid(format!("trace has no scheme {s}")))
        };
        let (g, w) = (mean("glnn")?, mean("wmmse")?);
        let (gs, ws) = (trace.scheme("glnn").unwrap(), trace.scheme("wmmse").unwrap());
        let trailing = |s: &[f64], t: usize| s[t + 1 - window..=t].iter().sum::<f64>() / window as f64;
        let mut from = None;
        for t in (warmup.max(window - 1)..n).rev() {
            if trailing(gs, t) >= trailing(ws, t) {
                from = Some(t);
            } else {
                break;
            }
        }
        Ok(Self {
            window,
            glnn_final_mean: g,
            wmmse_final_mean: w,
            mrt_final_mean: mean("mrt")?,
            zf_final_mean: mean("zf")?,
            ratio: g / w,
            surpasses_wmmse_from: from,
        })
    }
}

fn baselines(seq: &[ChannelSet], sc: &BeamformingScenario, cfg: &BfConfig) -> Result<[Vec<f64>; 3]> {
    let (p, noise) = (sc.power_budget, sc.noise_power);
    let mut out = [Vec::new(), Vec::new(), Vec::new()];
    let mut prev: Option<PrecoderSet> = None;
    for h in seq {
        let init = if cfg.wmmse_warm_start { prev.as_ref() } else { None };
        let res = wmmse_solve(h, p, noise, init, &cfg.wmmse)?;
        out[0].push(res.sum_rate());
        prev = Some(res.precoders);
        out[1].push(sum_se(h, &mrt(h, p, noise)?)?);
        out[2].push(sum_se(h, &zf(h, p, noise)?)?);
    }
    Ok(out)
}

fn glnn_trace(seq: &[ChannelSet], sc: &BeamformingScenario, cfg: &GlnnConfig) -> Result<Vec<f64>> {
    let mut net = Glnn::new(cfg.clone(), sc.n_users, sc.n_bs_antennas, sc.n_user_antennas)?;
    let mut v = Glnn::initial_precoders(&seq[0], sc.power_budget, sc.noise_power)?;
    let mut out = Vec::with_capacity(seq.len());
    for (t, h) in seq.iter().enumerate() {
        for _ in 1..cfg.updates_per_interval {
            let s = net
                .step(h, &v)
                .map_err(|e| Error::Numerical(format!("glnn aborted at step {t}: {e}")))?;
            v = s.precoders;
        }
        let s = net
            .step(h, &v)
            .map_err(|e| Error::Numerical(format!("glnn aborted at step {t}: {e}")))?;
        if !s.precoders.is_feasible() {
            return Err(Error::Numerical(format!("glnn precoder infeasible at step {t}")));
        }
        out.push(s.sum_rate);
        v = s.precoders;
    }
    Ok(out)
}

/// Runs GLNN online over the scenario with WMMSE, MRT and ZF recomputed at
/// every step. GLNN and the baselines run on separate threads; each is
/// sequential and deterministic.
pub fn run_glnn_experiment(sc: &BeamformingScenario, cfg: &BfConfig) -> Result<SeTrace> {
    let seq = beamforming_channel_sequence(sc)?;
    let (g, b) = std::thread::scope(|s| {
        let g = s.spawn(|| glnn_trace(&seq, sc, &cfg.glnn));
        let b = baselines(&seq, sc, cfg);
        (g.join().expect("glnn thread panicked"), b)
    });
    let [w, m, z] = b?;
    let g = g?;
    Ok(SeTrace {
        seed: sc.seed,
        phase: (0..seq.len()).map(|t| sc.phase_of(t)).collect(),
        boundaries: sc.phase_boundaries(),
        schemes: SCHEMES.iter().map(|s| s.to_string()).zip([g, w, m, z]).collect(),
    })
}
