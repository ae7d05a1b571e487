//! Matched-filter and zero-forcing precoders with equal power per user.

use num_complex::Complex64;

use super::se::PrecoderSet;
use crate::channel::{CMatrix, ChannelSet};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReferenceKind {
    Mrt,
    Zf,
}

impl ReferenceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ReferenceKind::Mrt => "mrt",
            ReferenceKind::Zf => "zf",
        }
    }
}

pub fn reference_precoders(
    kind: ReferenceKind,
    h: &ChannelSet,
    power_budget: f64,
    noise_power: f64,
) -> Result<PrecoderSet> {
    match kind {
        ReferenceKind::Mrt => mrt(h, power_budget, noise_power),
        ReferenceKind::Zf => zf(h, power_budget, noise_power),
    }
}

/// Rescales each user's block to `P/K` (blocks that are exactly zero stay
/// zero).
fn equal_split(blocks: Vec<CMatrix>, power_budget: f64, noise_power: f64) -> PrecoderSet {
    let share = power_budget / blocks.len() as f64;
    let v = blocks
        .into_iter()
        .map(|b| {
            let n = b.norm();
            if n > 0.0 {
                b * Complex64::new((share).sqrt() / n, 0.0)
            } else {
                b
            }
        })
        .collect();
    PrecoderSet {
        v,
        power_budget,
        noise_power,
    }
}

/// `V_k ∝ H_kᴴ`
pub fn mrt(h: &ChannelSet, power_budget: f64, noise_power: f64) -> Result<PrecoderSet> {
    if !(power_budget > 0.0) {
        return Err(Error::Invalid(format!("power budget {power_budget} must be > 0")));
    }
    Ok(equal_split(
        h.h.iter().map(|hk| hk.adjoint()).collect(),
        power_budget,
        noise_power,
    ))
}

/// Columns of `Sᴴ(S Sᴴ)⁻¹` for the stacked channel `S`, so that every user's
/// streams are nulled at every other user.
pub fn zf(h: &ChannelSet, power_budget: f64, noise_power: f64) -> Result<PrecoderSet> {
    if !(power_budget > 0.0) {
        return Err(Error::Invalid(format!("power budget {power_budget} must be > 0")));
    }
    let m = h.n_tx();
    let total: usize = h.h.iter().map(|hk| hk.nrows()).sum();
    if m < total {
        return Err(Error::Invalid(format!(
            "zero-forcing needs at least {total} transmit antennas, have {m}"
        )));
    }
    let mut s = CMatrix::zeros(total, m);
    let mut row = 0;
    for hk in &h.h {
        s.view_mut((row, 0), hk.shape()).copy_from(hk);
        row += hk.nrows();
    }
    let gram = &s * s.adjoint();
    let inv = gram
        .try_inverse()
        .ok_or_else(|| Error::Numerical("stacked channel is rank deficient".into()))?;
    let x = s.adjoint() * inv;
    let mut blocks = Vec::with_capacity(h.n_users());
    let mut col = 0;
    for hk in &h.h {
        blocks.push(x.columns(col, hk.nrows()).into_owned());
        col += hk.nrows();
    }
    Ok(equal_split(blocks, power_budget, noise_power))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

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
    fn mrt_single_user_is_matched_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_channels(&mut rng, 1, 1, 6);
        let v = mrt(&h, 2.0, 0.1).unwrap();
        let want = h.h[0].adjoint() * Complex64::new(2f64.sqrt() / h.h[0].norm(), 0.0);
        assert!((&v.v[0] - want).norm() < 1e-14);
    }

    #[test]
    fn zf_nulls_interference() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let h = random_channels(&mut rng, 4, 2, 10);
            let v = zf(&h, 1.0, 0.1).unwrap();
            for (j, hj) in h.h.iter().enumerate() {
                for (k, vk) in v.v.iter().enumerate() {
                    if j != k {
                        assert!((hj * vk).norm_squared() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn both_use_the_full_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = random_channels(&mut rng, 3, 2, 8);
        for kind in [ReferenceKind::Mrt, ReferenceKind::Zf] {
            let v = reference_precoders(kind, &h, 1.5, 0.1).unwrap();
            assert!((v.total_power() - 1.5).abs() < 1e-12);
            for vk in &v.v {
                assert!((vk.norm_squared() - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zf_needs_enough_antennas() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = random_channels(&mut rng, 3, 2, 5);
        assert!(zf(&h, 1.0, 0.1).is_err());
        assert!(mrt(&h, 1.0, 0.1).is_ok());
    }
}
