//! Doppler-correlated Rayleigh fading via a sum of sinusoids.
//!
//! Each coefficient follows the Zheng–Xiao construction
//!
//! ```text
//! h(t) = sqrt(2/N) Σₙ exp(jψₙ) cos(θₙ(t)),   αₙ = (2πn − π + ϑ) / (4N)
//! dθₙ/dt = 2π f_D cos αₙ
//! ```
//!
//! with `ψₙ`, `ϑ` and the initial phase drawn uniformly. Phases are
//! accumulated step by step, so the Doppler may change between steps
//! without a jump in the gain.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::csi::CsiTensor;
use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Sinusoids per fading process.
pub const DEFAULT_SINUSOIDS: usize = 64;

/// Maximum Doppler shift `v·f_c/c` in hertz.
pub fn doppler_frequency(speed_mps: f64, carrier_hz: f64) -> Result<f64> {
    if !(speed_mps >= 0.0 && carrier_hz >= 0.0) || !speed_mps.is_finite() || !carrier_hz.is_finite() {
        return Err(Error::Invalid(format!(
            "doppler: speed {speed_mps} and carrier {carrier_hz} must be finite and >= 0"
        )));
    }
    Ok(speed_mps * carrier_hz / SPEED_OF_LIGHT)
}

/// Bessel function of the first kind, order zero, from
/// `J₀(x) = (1/π) ∫₀^π cos(x sin t) dt`. The integrand is smooth and
/// periodic, so the trapezoid rule converges geometrically; the node count
/// grows with `|x|` to keep the error at rounding level.
pub fn bessel_j0(x: f64) -> f64 {
    let n = 64 + 2 * x.abs().ceil() as usize;
    let h = PI / n as f64;
    // Both endpoints evaluate to cos(0) = 1.
    let ends = 1.0;
    let inner: f64 = (1..n).map(|k| (x * (k as f64 * h).sin()).cos()).sum();
    (ends + inner) / n as f64
}

#[derive(Clone, Debug)]
pub struct SosFader {
    weights: Vec<Complex64>,
    rates: Vec<f64>,
    phases: Vec<f64>,
}

impl SosFader {
    pub fn new(rng: &mut impl Rng, n_sinusoids: usize) -> Self {
        let n = n_sinusoids.max(1);
        let offset = rng.random_range(-PI..PI);
        let phase0 = rng.random_range(0.0..2.0 * PI);
        let amp = (2.0 / n as f64).sqrt();
        let weights = (0..n)
            .map(|_| Complex64::from_polar(amp, rng.random_range(-PI..PI)))
            .collect();
        let rates = (1..=n)
            .map(|k| ((2.0 * PI * k as f64 - PI + offset) / (4.0 * n as f64)).cos())
            .collect();
        Self {
            weights,
            rates,
            phases: vec![phase0; n],
        }
    }

    /// Current gain.
    pub fn gain(&self) -> Complex64 {
        self.weights
            .iter()
            .zip(&self.phases)
            .map(|(w, p)| w * p.cos())
            .sum()
    }

    /// Moves time forward by `dt` seconds at Doppler `doppler_hz`.
    pub fn advance(&mut self, doppler_hz: f64, dt: f64) {
        let w = 2.0 * PI * doppler_hz * dt;
        for (p, r) in self.phases.iter_mut().zip(&self.rates) {
            *p = (*p + w * r).rem_euclid(2.0 * PI);
        }
    }
}

/// Independent unit-power Jakes processes, one per `(rx, tx)` entry,
/// sampled every `dt` seconds. The result has a single user.
pub fn jakes_sequence(
    doppler_hz: f64,
    n_steps: usize,
    dt: f64,
    shape: (usize, usize),
    seed: u64,
) -> Result<CsiTensor> {
    if !(doppler_hz >= 0.0) || !doppler_hz.is_finite() {
        return Err(Error::Invalid(format!("jakes: doppler {doppler_hz} must be >= 0")));
    }
    if !(dt > 0.0) {
        return Err(Error::Invalid(format!("jakes: dt {dt} must be > 0")));
    }
    let (n_rx, n_tx) = shape;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut faders: Vec<SosFader> = (0..n_rx * n_tx)
        .map(|_| SosFader::new(&mut rng, DEFAULT_SINUSOIDS))
        .collect();
    let mut csi = CsiTensor::zeros(n_steps, 1, n_rx, n_tx);
    for t in 0..n_steps {
        for (i, f) in faders.iter_mut().enumerate() {
            csi.set(t, 0, i / n_tx, i % n_tx, f.gain());
            f.advance(doppler_hz, dt);
        }
    }
    Ok(csi)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Power series `Σ (−x²/4)^k / (k!)²`, summed until terms vanish.
    fn j0_series(x: f64) -> f64 {
        let q = -x * x / 4.0;
        let (mut term, mut sum, mut k) = (1.0f64, 1.0f64, 1.0f64);
        while term.abs() > 1e-18 * sum.abs().max(1e-300) && k < 200.0 {
            term *= q / (k * k);
            sum += term;
            k += 1.0;
        }
        sum
    }

    #[test]
    fn j0_matches_series() {
        // The series loses digits to cancellation beyond x ≈ 10.
        for i in 0..=100 {
            let x = i as f64 * 0.1;
            assert!((bessel_j0(x) - j0_series(x)).abs() < 1e-11, "x={x}");
        }
        // Tabulated zeros cover the larger arguments.
        for z in [2.404825557695773, 5.520078110286311, 8.653727912911012, 11.79153443901428, 14.93091770848779, 18.07106396791092] {
            assert!(bessel_j0(z).abs() < 1e-12, "zero {z}");
        }
    }

    #[test]
    fn doppler_examples() {
        assert_eq!(doppler_frequency(0.0, 6e9).unwrap(), 0.0);
        assert!((doppler_frequency(2.0, 6e9).unwrap() - 40.0277).abs() < 1e-4);
        assert!((doppler_frequency(30.0, 28e9).unwrap() - 2801.94).abs() < 1e-2);
        assert!(doppler_frequency(-1.0, 6e9).is_err());
    }

    #[test]
    fn zero_doppler_is_constant() {
        let csi = jakes_sequence(0.0, 50, 1e-3, (1, 3), 4).unwrap();
        for t in 1..50 {
            for j in 0..3 {
                assert_eq!(csi.get(t, 0, 0, j), csi.get(0, 0, 0, j));
            }
        }
    }

    #[test]
    fn power_and_autocorrelation_follow_jakes() {
        let fd = doppler_frequency(2.0, 6e9).unwrap();
        let dt = 1e-3;
        let n = 100_000;
        let csi = jakes_sequence(fd, n, dt, (1, 2), 11).unwrap();
        for j in 0..2 {
            let h: Vec<Complex64> = (0..n).map(|t| csi.get(t, 0, 0, j)).collect();
            let p = h.iter().map(|c| c.norm_sqr()).sum::<f64>() / n as f64;
            assert!((p - 1.0).abs() < 0.02, "power {p}");
            for lag in 1..=50 {
                let r: Complex64 =
                    (0..n - lag).map(|t| h[t + lag] * h[t].conj()).sum::<Complex64>() / (n - lag) as f64;
                let want = j0_series(2.0 * PI * fd * lag as f64 * dt);
                assert!((r.re - want).abs() < 0.02, "lag {lag}: {} vs {want}", r.re);
                assert!(r.im.abs() < 0.02);
            }
        }
    }

    #[test]
    fn same_seed_same_sequence() {
        let a = jakes_sequence(40.0, 100, 1e-3, (2, 2), 9).unwrap();
        let b = jakes_sequence(40.0, 100, 1e-3, (2, 2), 9).unwrap();
        assert_eq!(a, b);
        let c = jakes_sequence(40.0, 100, 1e-3, (2, 2), 10).unwrap();
        assert_ne!(a, c);
    }
}
