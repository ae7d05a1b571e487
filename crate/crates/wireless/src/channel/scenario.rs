//! Single-user prediction scenario and the user's random walk.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::csi::CsiTensor;
use super::fading::{doppler_frequency, jakes_sequence};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionScenario {
    pub carrier_hz: f64,
    pub n_bs_antennas: usize,
    pub n_users: usize,
    pub n_user_antennas: usize,
    pub antenna_spacing: f64,
    pub speed_mps: f64,
    pub sample_interval_s: f64,
    pub n_steps: usize,
    pub seed: u64,
}

impl Default for PredictionScenario {
    fn default() -> Self {
        Self {
            carrier_hz: 6e9,
            n_bs_antennas: 4,
            n_users: 1,
            n_user_antennas: 1,
            antenna_spacing: 0.5,
            speed_mps: 2.0,
            sample_interval_s: 1e-3,
            n_steps: 25_000,
            seed: 0,
        }
    }
}

impl PredictionScenario {
    pub fn doppler_hz(&self) -> Result<f64> {
        doppler_frequency(self.speed_mps, self.carrier_hz)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("carrier_hz", self.carrier_hz),
            ("antenna_spacing", self.antenna_spacing),
            ("speed_mps", self.speed_mps),
            ("sample_interval_s", self.sample_interval_s),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be a positive number, got {v}")));
            }
        }
        for (name, v) in [
            ("n_bs_antennas", self.n_bs_antennas),
            ("n_users", self.n_users),
            ("n_user_antennas", self.n_user_antennas),
            ("n_steps", self.n_steps),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be >= 1")));
            }
        }
        let nd = self.doppler_hz()? * self.sample_interval_s;
        if nd >= 0.1 {
            return Err(Error::Config(format!(
                "normalized Doppler f_D·dt = {nd:.4} must stay below 0.1"
            )));
        }
        Ok(())
    }

    /// CSI of every user, each coefficient an independent Jakes process.
    pub fn generate(&self) -> Result<CsiTensor> {
        self.validate()?;
        let fd = self.doppler_hz()?;
        let (nr, nt) = (self.n_user_antennas, self.n_bs_antennas);
        let mut csi = CsiTensor::zeros(self.n_steps, self.n_users, nr, nt);
        for u in 0..self.n_users {
            let seed = self.seed.wrapping_add((u as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let one = jakes_sequence(fd, self.n_steps, self.sample_interval_s, (nr, nt), seed)?;
            for t in 0..self.n_steps {
                for r in 0..nr {
                    for c in 0..nt {
                        csi.set(t, u, r, c, one.get(t, 0, r, c));
                    }
                }
            }
        }
        Ok(csi)
    }

    pub fn trajectory(&self) -> Result<Trajectory> {
        random_walk(self.n_steps, self.speed_mps, self.sample_interval_s, self.seed)
    }
}

/// Positions in meters, one per step, starting at the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub positions: Vec<[f64; 2]>,
}

/// Each step moves `speed·dt` in a fresh uniform direction on `[0, 2π)`.
pub fn random_walk(n_steps: usize, speed_mps: f64, dt: f64, seed: u64) -> Result<Trajectory> {
    if n_steps == 0 {
        return Err(Error::Invalid("random walk needs at least one step".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = speed_mps * dt;
    let mut positions = Vec::with_capacity(n_steps);
    let mut p = [0.0, 0.0];
    positions.push(p);
    for _ in 1..n_steps {
        let a = rng.random_range(0.0..2.0 * PI);
        p = [p[0] + step * a.cos(), p[1] + step * a.sin()];
        positions.push(p);
    }
    Ok(Trajectory { positions })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn walk_examples() {
        let still = random_walk(20, 0.0, 1e-3, 1).unwrap();
        assert!(still.positions.iter().all(|p| *p == [0.0, 0.0]));
        let w = random_walk(500, 2.0, 1e-3, 3).unwrap();
        assert_eq!(w.positions.len(), 500);
        for pair in w.positions.windows(2) {
            let d = ((pair[1][0] - pair[0][0]).powi(2) + (pair[1][1] - pair[0][1]).powi(2)).sqrt();
            assert!((d - 2e-3).abs() < 1e-12);
        }
        assert_eq!(w, random_walk(500, 2.0, 1e-3, 3).unwrap());
        assert!(random_walk(0, 1.0, 1.0, 0).is_err());
    }

    #[test]
    fn default_scenario_is_valid_and_slow_fading() {
        let sc = PredictionScenario::default();
        sc.validate().unwrap();
        let nd = sc.doppler_hz().unwrap() * sc.sample_interval_s;
        assert!((nd - 0.0400277).abs() < 1e-6);
    }

    #[test]
    fn fast_fading_is_rejected() {
        let sc = PredictionScenario {
            speed_mps: 6.0,
            sample_interval_s: 1e-2,
            ..PredictionScenario::default()
        };
        assert!(matches!(sc.validate(), Err(Error::Config(_))));
        let sc = PredictionScenario {
            n_steps: 0,
            ..PredictionScenario::default()
        };
        assert!(sc.generate().is_err());
    }

    #[test]
    fn generate_shape_power_and_determinism() {
        let sc = PredictionScenario {
            n_steps: 20_000,
            n_users: 2,
            ..PredictionScenario::default()
        };
        let csi = sc.generate().unwrap();
        assert_eq!(csi.shape(), [20_000, 2, 1, 4]);
        assert!((csi.mean_power() - 1.0).abs() < 0.1);
        assert_eq!(csi, sc.generate().unwrap());
        // Users fade independently.
        let a = csi.get(100, 0, 0, 0);
        let b = csi.get(100, 1, 0, 0);
        assert_ne!(a, b);
    }
}
