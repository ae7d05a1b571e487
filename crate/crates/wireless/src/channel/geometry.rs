//! Uniform linear arrays and the multi-user geometric channel.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::fading::{doppler_frequency, SosFader, DEFAULT_SINUSOIDS};
use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// ULA response, entry `m` is `exp(j·2π·spacing·m·sin(angle))`.
pub fn steering_vector(m: usize, spacing_wavelengths: f64, angle_rad: f64) -> Result<Vec<Complex64>> {
    if m == 0 {
        return Err(Error::Invalid("steering vector needs at least one antenna".into()));
    }
    let k = 2.0 * PI * spacing_wavelengths * angle_rad.sin();
    Ok((0..m).map(|i| Complex64::from_polar(1.0, k * i as f64)).collect())
}

/// Per-user channel matrices `H_k`, each `N_r × M`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSet {
    pub h: Vec<CMatrix>,
}

impl ChannelSet {
    pub fn new(h: Vec<CMatrix>) -> Result<Self> {
        let Some(first) = h.first() else {
            return Err(Error::Invalid("channel set needs at least one user".into()));
        };
        let m = first.ncols();
        if h.iter().any(|hk| hk.ncols() != m || hk.nrows() == 0) {
            return Err(Error::Invalid("all users must see the same transmit array".into()));
        }
        if h.iter().flat_map(|hk| hk.iter()).any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Invalid("non-finite channel entry".into()));
        }
        Ok(Self { h })
    }

    pub fn n_users(&self) -> usize {
        self.h.len()
    }

    pub fn n_tx(&self) -> usize {
        self.h[0].ncols()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Phase {
    pub speed_mps: f64,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BeamformingScenario {
    pub carrier_hz: f64,
    pub n_bs_antennas: usize,
    pub n_users: usize,
    pub n_user_antennas: usize,
    pub antenna_spacing: f64,
    pub phases: Vec<Phase>,
    pub sample_interval_s: f64,
    pub n_paths: usize,
    pub noise_power: f64,
    pub power_budget: f64,
    pub seed: u64,
}

/// Default interval between beamforming updates, seconds.
pub const BF_SAMPLE_INTERVAL_S: f64 = 2e-6;

impl Default for BeamformingScenario {
    fn default() -> Self {
        Self {
            carrier_hz: 28e9,
            n_bs_antennas: 64,
            n_users: 4,
            n_user_antennas: 2,
            antenna_spacing: 0.5,
            phases: vec![
                Phase {
                    speed_mps: 6.0,
                    steps: 700,
                },
                Phase {
                    speed_mps: 15.0,
                    steps: 600,
                },
                Phase {
                    speed_mps: 30.0,
                    steps: 500,
                },
            ],
            sample_interval_s: BF_SAMPLE_INTERVAL_S,
            n_paths: 3,
            // 10 dB mean SNR at unit transmit power.
            noise_power: 0.1,
            power_budget: 1.0,
            seed: 0,
        }
    }
}

impl BeamformingScenario {
    pub fn n_steps(&self) -> usize {
        self.phases.iter().map(|p| p.steps).sum()
    }

    /// First step of every phase after the first.
    pub fn phase_boundaries(&self) -> Vec<usize> {
        let mut acc = 0;
        let mut out = Vec::new();
        for p in &self.phases[..self.phases.len().saturating_sub(1)] {
            acc += p.steps;
            out.push(acc);
        }
        out
    }

    /// Phase index active at step `t`.
    pub fn phase_of(&self, t: usize) -> usize {
        self.phase_boundaries().iter().filter(|&&b| t >= b).count()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("carrier_hz", self.carrier_hz),
            ("antenna_spacing", self.antenna_spacing),
            ("sample_interval_s", self.sample_interval_s),
            ("noise_power", self.noise_power),
            ("power_budget", self.power_budget),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be a positive number, got {v}")));
            }
        }
        for (name, v) in [
            ("n_bs_antennas", self.n_bs_antennas),
            ("n_users", self.n_users),
            ("n_user_antennas", self.n_user_antennas),
            ("n_paths", self.n_paths),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be >= 1")));
            }
        }
        if self.n_bs_antennas < self.n_users * self.n_user_antennas {
            return Err(Error::Config(format!(
                "n_bs_antennas = {} is below n_users·n_user_antennas = {}",
                self.n_bs_antennas,
                self.n_users * self.n_user_antennas
            )));
        }
        if self.phases.is_empty() {
            return Err(Error::Config("at least one velocity phase is required".into()));
        }
        for (i, p) in self.phases.iter().enumerate() {
            if p.steps == 0 || !(p.speed_mps >= 0.0) || !p.speed_mps.is_finite() {
                return Err(Error::Config(format!(
                    "phase {i}: speed must be >= 0 and steps >= 1 (got {} m/s, {} steps)",
                    p.speed_mps, p.steps
                )));
            }
        }
        Ok(())
    }
}

/// Geometric channel sequence: for user `k`,
/// `H_k(t) = sqrt(1/L) Σ_p g_kp(t) a_rx(θ_kp) a_tx(φ_kp)ᴴ`, with angles fixed
/// for the episode and each gain `g_kp` an independent unit-power Jakes
/// process running at the Doppler of the active phase. Gains evolve
/// continuously across phase boundaries.
pub fn beamforming_channel_sequence(sc: &BeamformingScenario) -> Result<Vec<ChannelSet>> {
    sc.validate()?;
    let (m, nr, l) = (sc.n_bs_antennas, sc.n_user_antennas, sc.n_paths);
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let mut responses = Vec::with_capacity(sc.n_users * l);
    for _ in 0..sc.n_users * l {
        let aod = rng.random_range(-PI / 2.0..PI / 2.0);
        let aoa = rng.random_range(-PI..PI);
        let a_tx = steering_vector(m, sc.antenna_spacing, aod)?;
        let a_rx = steering_vector(nr, sc.antenna_spacing, aoa)?;
        // a_rx · a_txᴴ
        responses.push(CMatrix::from_fn(nr, m, |i, j| a_rx[i] * a_tx[j].conj()));
    }
    let mut faders: Vec<SosFader> = (0..sc.n_users * l)
        .map(|_| SosFader::new(&mut rng, DEFAULT_SINUSOIDS))
        .collect();
    let scale = (1.0 / l as f64).sqrt();
    let mut out = Vec::with_capacity(sc.n_steps());
    for phase in &sc.phases {
        let fd = doppler_frequency(phase.speed_mps, sc.carrier_hz)?;
        for _ in 0..phase.steps {
            let h = (0..sc.n_users)
                .map(|k| {
                    let mut hk = CMatrix::zeros(nr, m);
                    for p in 0..l {
                        let g = faders[k * l + p].gain() * scale;
                        hk += &responses[k * l + p] * g;
                    }
                    hk
                })
                .collect();
            out.push(ChannelSet { h });
            for f in &mut faders {
                f.advance(fd, sc.sample_interval_s);
            }
        }
    }
    Ok(out)
}
