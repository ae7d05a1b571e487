//! Online gradient-fed liquid network for precoder tracking.
//!
//! At every interval the sum-rate gradient at the current precoder and the
//! precoder itself are projected onto the sensory layer of an NCP; the
//! motor layer is read out linearly as a precoder increment, the result is
//! projected onto the power budget, and the network takes one Adam step on
//! the negative sum rate it just achieved.

use lnn_core::cells::CellKind;
use lnn_core::wiring::ncp_cell;
use lnn_core::{build_wiring, Adam, AdamConfig, Cell, Parameters, Tape, Tensor, Var, WiringConfig};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::reference::mrt;
use super::se::{lower, lower_on_tape, se_gradient, split_parts, sum_se_on_tape, PrecoderSet};
use crate::channel::{CMatrix, ChannelSet};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct GlnnConfig {
    pub cell: CellKind,
    /// Sensory features after the fixed random projection.
    pub n_features: usize,
    pub n_inter: usize,
    pub n_command: usize,
    pub n_motor: usize,
    pub lr: f64,
    /// Integration interval of the cell per update, in cell time units.
    pub cell_dt: f64,
    /// Network updates (each with one Adam step) per channel interval.
    pub updates_per_interval: usize,
    pub seed: u64,
}

impl Default for GlnnConfig {
    fn default() -> Self {
        Self {
            cell: CellKind::Ltc,
            n_features: 64,
            n_inter: 16,
            n_command: 10,
            n_motor: 4,
            lr: 0.003,
            cell_dt: 1.0,
            updates_per_interval: 4,
            seed: 0,
        }
    }
}

impl GlnnConfig {
    pub fn wiring(&self) -> WiringConfig {
        WiringConfig {
            n_inter: self.n_inter,
            n_command: self.n_command,
            n_motor: self.n_motor,
            n_command_recurrent: 2 * self.n_command,
            fanin_motor: 4.min(self.n_command),
            fanout_inter: 4.min(self.n_command),
            fanout_sensory: 4.min(self.n_inter),
            ..WiringConfig::default_for(self.n_features, self.seed)
        }
    }
}

pub struct Glnn {
    pub cell: Cell,
    /// `n_features × n_raw`
    projection: Tensor,
    adam: Adam,
    state: Tensor,
    shape: (usize, usize, usize),
    pub config: GlnnConfig,
}

/// Outcome of one interval.
#[derive(Clone, Debug)]
pub struct GlnnStep {
    pub precoders: PrecoderSet,
    pub sum_rate: f64,
}

impl Glnn {
    /// Network for `n_users` users, `m` transmit antennas and `d` streams.
    pub fn new(config: GlnnConfig, n_users: usize, m: usize, d: usize) -> Result<Self> {
        if !(config.lr > 0.0)
            || !(config.cell_dt > 0.0)
            || config.n_features == 0
            || config.updates_per_interval == 0
        {
            return Err(Error::Config(
                "glnn: lr, cell_dt, n_features and updates_per_interval must be positive".into(),
            ));
        }
        if config.cell == CellKind::Gru {
            return Err(Error::Config("glnn: the network must be a liquid cell (ltc or cfc)".into()));
        }
        let wiring = build_wiring(&config.wiring())?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let n_out = 2 * n_users * m * d;
        let mut cell = ncp_cell(config.cell, &wiring, n_out, &mut rng)?;
        // Starts as the identity update: no increment until trained.
        let ro = cell.readout_mut();
        ro.w = Tensor::zeros(ro.w.shape());
        let n_raw = 2 * n_out;
        let s = 1.0 / (n_raw as f64).sqrt();
        let data = (0..config.n_features * n_raw)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * s
            })
            .collect();
        let projection = Tensor::matrix(config.n_features, n_raw, data)?;
        let state = cell.zero_state(1);
        Ok(Self {
            cell,
            projection,
            adam: Adam::new(AdamConfig::with_lr(config.lr)),
            state,
            shape: (n_users, m, d),
            config,
        })
    }

    /// Sensory input: gradient scaled by `1/(1+‖g‖_F)` and the precoder scaled
    /// by `1/√P`, both with interleaved real and imaginary parts, through the
    /// fixed projection.
    fn features(&self, g: &[CMatrix], v: &PrecoderSet) -> Tensor {
        let gn: f64 = g.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt();
        let gs = 1.0 / (1.0 + gn);
        let vs = 1.0 / v.power_budget.sqrt();
        let mut raw = Vec::with_capacity(self.projection.shape()[1]);
        for (mats, s) in [(g, gs), (&v.v[..], vs)] {
            for a in mats {
                for z in a.iter() {
                    raw.push(z.re * s);
                    raw.push(z.im * s);
                }
            }
        }
        let n_raw = raw.len();
        let nf = self.projection.shape()[0];
        let p = self.projection.data();
        let out = (0..nf)
            .map(|i| p[i * n_raw..(i + 1) * n_raw].iter().zip(&raw).map(|(a, b)| a * b).sum())
            .collect();
        Tensor::matrix(1, nf, out).expect("sized")
    }

    /// One interval on channel `h` starting from precoder `v`.
    pub fn step(&mut self, h: &ChannelSet, v: &PrecoderSet) -> Result<GlnnStep> {
        let (k, m, d) = self.shape;
        if h.n_users() != k || h.n_tx() != m || v.v.iter().any(|x| x.shape() != (m, d)) {
            return Err(Error::Invalid("glnn: channel or precoder shape changed".into()));
        }
        let (_, g) = se_gradient(h, v)?;
        let x = self.features(&g, v);

        let mut tape = Tape::new();
        let b = self.cell.bind(&mut tape, true)?;
        let h0 = tape.constant(self.state.clone());
        let xv = tape.constant(x);
        let h1 = b.cell.step(&mut tape, h0, xv, self.config.cell_dt)?;
        let out = b.cell.readout(&mut tape, h1)?;

        let block = m * d;
        let mut parts = Vec::with_capacity(2 * k);
        for (u, vk) in v.v.iter().enumerate() {
            let (re0, im0) = split_parts(vk);
            let base = 2 * u * block;
            let dre = tape.slice_cols(out, base, base + block)?;
            let dre = tape.reshape(dre, &[m, d])?;
            let dim = tape.slice_cols(out, base + block, base + 2 * block)?;
            let dim = tape.reshape(dim, &[m, d])?;
            let (re0, im0) = (tape.constant(re0), tape.constant(im0));
            parts.push(tape.add(re0, dre)?);
            parts.push(tape.add(im0, dim)?);
        }
        let parts = project_on_tape(&mut tape, &parts, v.power_budget)?;
        let h_low: Vec<Var> = h.h.iter().map(|hk| tape.constant(lower(hk))).collect();
        let mut v_low = Vec::with_capacity(k);
        for pair in parts.chunks(2) {
            v_low.push(lower_on_tape(&mut tape, pair[0], pair[1])?);
        }
        let rate = sum_se_on_tape(&mut tape, &h_low, &v_low, v.noise_power)?;
        let loss = tape.neg(rate)?;
        let sum_rate = tape.value(rate).item();
        if !sum_rate.is_finite() {
            return Err(Error::Numerical("glnn: non-finite sum rate".into()));
        }

        let precoders = PrecoderSet {
            v: parts
                .chunks(2)
                .map(|pair| {
                    let (re, im) = (tape.value(pair[0]), tape.value(pair[1]));
                    CMatrix::from_fn(m, d, |i, j| Complex64::new(re.at(i, j), im.at(i, j)))
                })
                .collect(),
            power_budget: v.power_budget,
            noise_power: v.noise_power,
        };
        self.state = tape.value(h1).clone();

        let grads = tape.backward(loss)?;
        let gs: Vec<Tensor> = b.params.iter().map(|&p| grads.get(p).clone()).collect();
        if gs.iter().any(|g| !g.all_finite()) {
            return Err(Error::Numerical("glnn: non-finite gradient".into()));
        }
        let mut params = self.cell.params_mut();
        self.adam.step(&mut params, &gs)?;
        self.cell.project();
        Ok(GlnnStep { precoders, sum_rate })
    }

    /// Equal-power MRT start for channel `h`.
    pub fn initial_precoders(h: &ChannelSet, power_budget: f64, noise_power: f64) -> Result<PrecoderSet> {
        mrt(h, power_budget, noise_power)
    }
}

/// Scales real/imaginary precoder parts onto the power budget when it is
/// exceeded; the scale is part of the graph.
fn project_on_tape(tape: &mut Tape, parts: &[Var], power_budget: f64) -> lnn_core::Result<Vec<Var>> {
    let mut total: Option<Var> = None;
    for &p in parts {
        let sq = tape.square(p)?;
        let s = tape.sum(sq)?;
        total = Some(match total {
            Some(t) => tape.add(t, s)?,
            None => s,
        });
    }
    let total = total.expect("at least one part");
    if tape.value(total).item() <= power_budget {
        return Ok(parts.to_vec());
    }
    // sqrt(P / p) = exp(-½ ln p) · sqrt(P)
    let lp = tape.log(total)?;
    let half = tape.scale(lp, -0.5)?;
    let e = tape.exp(half)?;
    let f = tape.scale(e, power_budget.sqrt())?;
    parts.iter().map(|&p| tape.mul(p, f)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamform::se::sum_se;
    use rand::Rng;

    fn random_channels(rng: &mut impl Rng, k: usize, nr: usize, m: usize) -> ChannelSet {
        ChannelSet::new(
            (0..k)
                .map(|_| {
                    CMatrix::from_fn(nr, m, |_, _| {
                        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                    })
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn first_step_keeps_the_start_and_later_steps_learn() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_channels(&mut rng, 2, 2, 8);
        let v0 = Glnn::initial_precoders(&h, 1.0, 0.1).unwrap();
        let mut net = Glnn::new(GlnnConfig::default(), 2, 8, 2).unwrap();
        let s = net.step(&h, &v0).unwrap();
        assert!((s.sum_rate - sum_se(&h, &v0).unwrap()).abs() < 1e-9);
        let mut v = s.precoders;
        let mut last = s.sum_rate;
        for _ in 0..300 {
            let s = net.step(&h, &v).unwrap();
            assert!(s.precoders.is_feasible());
            assert!((sum_se(&h, &s.precoders).unwrap() - s.sum_rate).abs() < 1e-8);
            v = s.precoders;
            last = s.sum_rate;
        }
        assert!(last > sum_se(&h, &v0).unwrap(), "no improvement on a static channel");
    }

    #[test]
    fn same_seed_same_updates() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = random_channels(&mut rng, 2, 2, 6);
        let run = || {
            let mut net = Glnn::new(GlnnConfig::default(), 2, 6, 2).unwrap();
            let mut v = Glnn::initial_precoders(&h, 1.0, 0.1).unwrap();
            let mut out = Vec::new();
            for _ in 0..20 {
                let s = net.step(&h, &v).unwrap();
                out.push(s.sum_rate);
                v = s.precoders;
            }
            out
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn projection_on_tape_matches_power_project() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::matrix(2, 2, vec![1.0, 2.0, 0.5, -1.0]).unwrap());
        let b = tape.leaf(Tensor::matrix(2, 2, vec![0.0, 1.0, -2.0, 0.3]).unwrap());
        let out = project_on_tape(&mut tape, &[a, b], 2.0).unwrap();
        let p: f64 = out.iter().flat_map(|&v| tape.value(v).data().to_vec()).map(|x| x * x).sum();
        assert!((p - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gru_is_rejected() {
        let cfg = GlnnConfig {
            cell: CellKind::Gru,
            ..GlnnConfig::default()
        };
        assert!(Glnn::new(cfg, 2, 4, 2).is_err());
    }
}
